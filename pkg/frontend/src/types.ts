// Server payload shapes, mirrored verbatim from the HTTP API.

export interface GraphEdge {
  cause: string;
  effect: string;
  strength: number;
  coverage: number;
  confirmed: boolean;
  removed: boolean;
}

export interface GraphPayload {
  nodes: string[];
  edges: GraphEdge[];
}

export interface LayoutPayload {
  positions: Record<string, [number, number]>;
  depths: Record<string, number>;
  circles: string[][];
  stress: number;
  crowded: boolean;
}

export interface DiagnosticsRecord {
  iter: number;
  nll_mean: number;
  nll_std: number;
  bic: number;
  p: number;
  auroc: number | null;
  delta_bic?: string;
  k?: number;
}

export interface PatternRow {
  id: string;
  category: "cause_only" | "cause_effect" | "effect_only";
  anchors: number[];
}

export interface PatternsPayload {
  rows: PatternRow[];
  order: number[];
  groups: Record<string, number>;
  aggregates: { cause: string; row_start: number; row_end: number }[];
  columns: string[];
  group_likelihood: Record<string, number>;
}

export interface PathFlowStep {
  from: string;
  to: string;
  continue: number;
  drop: number;
}

export interface ComparisonCell {
  cause: string;
  effect: string;
  strength_1: number;
  strength_2: number;
  category: "only_first" | "only_second" | "both_diff" | "both_same" | "neither";
}

export interface ComparisonPayload {
  types: string[];
  cells: ComparisonCell[];
}

export interface SnapshotInfo {
  id: string;
  created_at: string;
  query: unknown;
}

export interface SessionResponse {
  id: string;
  vocabulary: string[];
  graph: GraphPayload;
  diagnostics: DiagnosticsRecord[];
  converged: boolean;
}

export interface RefitResponse {
  graph: GraphPayload;
  diagnostics: DiagnosticsRecord[];
  layout: LayoutPayload;
  converged: boolean;
}

export interface ExpandResponse {
  new_nodes: string[];
  new_edges: GraphEdge[];
  graph: GraphPayload;
}
