// SVG renderers. Every number on screen comes from a server payload;
// the only client-side arithmetic is pixel mapping.

import type {
  ComparisonPayload,
  DiagnosticsRecord,
  GraphEdge,
  GraphPayload,
  LayoutPayload,
  PatternsPayload,
} from "./types.js";
import type { Pair, ViewState } from "./state.js";

const SVG = "http://www.w3.org/2000/svg";
const NODE_R = 20;

function el<K extends keyof SVGElementTagNameMap>(
  tag: K, attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

// sequential scale for causal strength: pale to saturated blue
export function strengthColor(strength: number, max: number): string {
  const t = max > 0 ? Math.min(strength / max, 1) : 0;
  const light = 92 - 55 * t;
  return `hsl(214, 70%, ${light.toFixed(0)}%)`;
}

export interface GraphHandlers {
  onSelectEdge?: (pair: Pair) => void;
  onExpand?: (node: string) => void;
}

export function renderGraph(
  container: HTMLElement,
  graph: GraphPayload,
  layout: LayoutPayload,
  state: ViewState,
  handlers: GraphHandlers = {},
): void {
  container.innerHTML = "";
  const xs = Object.values(layout.positions).map((p) => p[0]);
  const ys = Object.values(layout.positions).map((p) => p[1]);
  const pad = NODE_R * 2.5;
  const minX = Math.min(0, ...xs) - pad;
  const minY = Math.min(0, ...ys) - pad;
  const w = Math.max(...xs, 600) - minX + pad;
  const h = Math.max(...ys, 400) - minY + pad;
  const svg = el("svg", { viewBox: `${minX} ${minY} ${w} ${h}`, class: "graph-view" });

  const defs = el("defs");
  const marker = el("marker", {
    id: "arrow", viewBox: "0 0 10 10", refX: 9, refY: 5,
    markerWidth: 7, markerHeight: 7, orient: "auto-start-reverse",
  });
  marker.appendChild(el("path", { d: "M 0 0 L 10 5 L 0 10 z", fill: "#666" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  const maxStrength = Math.max(...graph.edges.map((e) => e.strength), 0);
  const pos = (n: string) => layout.positions[n] ?? [0, 0];
  const strongestInto = new Map<string, number>();
  for (const e of graph.edges) {
    if (e.removed) continue;
    strongestInto.set(e.cause, Math.max(strongestInto.get(e.cause) ?? 0, e.strength));
  }

  const edgesGroup = el("g", { class: "edges" });
  for (const edge of graph.edges) {
    if (edge.removed) continue;
    const [x1, y1] = pos(edge.cause);
    const [x2, y2] = pos(edge.effect);
    const dx = x2 - x1;
    const dy = y2 - y1;
    const len = Math.hypot(dx, dy) || 1;
    const tx = x2 - (dx / len) * (NODE_R + 4);
    const ty = y2 - (dy / len) * (NODE_R + 4);
    const line = el("line", {
      x1, y1, x2: tx, y2: ty,
      "marker-end": "url(#arrow)",
      class: edgeClass(edge, state),
      "stroke-width": 1 + 3 * (maxStrength > 0 ? edge.strength / maxStrength : 0),
    });
    line.dataset.cause = edge.cause;
    line.dataset.effect = edge.effect;
    line.dataset.strength = String(edge.strength);
    line.dataset.coverage = String(edge.coverage);
    line.dataset.confirmed = String(edge.confirmed);
    line.dataset.removed = String(edge.removed);
    line.addEventListener("click", () => handlers.onSelectEdge?.([edge.cause, edge.effect]));
    edgesGroup.appendChild(line);
  }
  svg.appendChild(edgesGroup);

  const nodesGroup = el("g", { class: "nodes" });
  for (const name of graph.nodes) {
    const [x, y] = pos(name);
    const g = el("g", { class: nodeClass(name, graph, state), transform: `translate(${x},${y})` });
    (g as SVGGElement).dataset.node = name;

    // outer ring: arc length encodes the node's edge coverage
    const coverage = Math.max(0, ...graph.edges
      .filter((e) => e.cause === name && !e.removed).map((e) => e.coverage));
    const ringR = NODE_R + 4;
    const circumference = 2 * Math.PI * ringR;
    const ring = el("circle", {
      r: ringR, class: "coverage-ring",
      "stroke-dasharray": `${(coverage * circumference).toFixed(2)} ${circumference.toFixed(2)}`,
      transform: "rotate(-90)",
    });
    ring.dataset.coverage = String(coverage);
    g.appendChild(ring);

    const confirmedCause = graph.edges.some((e) => e.cause === name && e.confirmed);
    const body = el("circle", {
      r: NODE_R,
      fill: confirmedCause ? "#9aa0a6" : strengthColor(strongestInto.get(name) ?? 0, maxStrength),
      class: "node-body",
    });
    g.appendChild(body);

    const label = el("text", { "text-anchor": "middle", dy: 5, class: "node-label" });
    label.textContent = name;
    g.appendChild(label);

    g.addEventListener("dblclick", () => handlers.onExpand?.(name));
    nodesGroup.appendChild(g);
  }
  svg.appendChild(nodesGroup);
  container.appendChild(svg);
}

function edgeClass(edge: GraphEdge, state: ViewState): string {
  const classes = ["edge"];
  if (edge.confirmed) classes.push("confirmed");
  const [c, e] = state.selectedEdge ?? ["", ""];
  if (edge.cause === c && edge.effect === e) classes.push("selected");
  if (state.pendingConfirmed.some((p) => p[0] === edge.cause && p[1] === edge.effect))
    classes.push("staged-confirm");
  if (state.pendingRemoved.some((p) => p[0] === edge.cause && p[1] === edge.effect))
    classes.push("staged-remove");
  return classes.join(" ");
}

function nodeClass(name: string, graph: GraphPayload, state: ViewState): string {
  const classes = ["node"];
  if (state.highlighted.includes(name)) classes.push("new");
  if (state.pendingConfirmed.some((p) => p[0] === name)) classes.push("staged-gray");
  return classes.join(" ");
}

const CATEGORY_COLORS: Record<string, string> = {
  cause_only: "#74b06f",
  cause_effect: "#5b8ff9",
  effect_only: "#e8864f",
};

export function renderPatterns(container: HTMLElement, payload: PatternsPayload): void {
  container.innerHTML = "";
  const rowH = 14;
  const left = 120;
  const colGap = 70;
  const width = left + colGap * (payload.columns.length + 2) + 140;
  const height = Math.max(payload.rows.length * rowH + 60, 120);
  const svg = el("svg", { viewBox: `0 0 ${width} ${height}`, class: "patterns-view" });

  // ribbon blocks per category, heights proportional to group counts
  const order: ("cause_only" | "cause_effect" | "effect_only")[] =
    ["cause_only", "cause_effect", "effect_only"];
  let yCursor = 30;
  for (const cat of order) {
    const count = payload.groups[cat] ?? 0;
    const blockH = count * rowH;
    const rect = el("rect", {
      x: 10, y: yCursor, width: 90, height: Math.max(blockH, 0),
      fill: CATEGORY_COLORS[cat], class: `ribbon ${cat}`,
    });
    rect.dataset.category = cat;
    rect.dataset.count = String(count);
    rect.dataset.height = String(blockH);
    svg.appendChild(rect);
    if (count > 0) {
      const t = el("text", { x: 14, y: yCursor + 12, class: "ribbon-label" });
      t.textContent = `${cat} (${count})`;
      svg.appendChild(t);
    }
    yCursor += blockH;
  }

  const colX = (k: number) => left + colGap * (k + 1);
  payload.columns.forEach((name, k) => {
    const t = el("text", { x: colX(k), y: 18, "text-anchor": "middle", class: "col-label" });
    t.textContent = name;
    svg.appendChild(t);
  });

  payload.rows.forEach((row, i) => {
    const y = 30 + i * rowH + rowH / 2;
    const line = el("line", {
      x1: left, y1: y, x2: width - 120, y2: y,
      class: `subseq ${row.category}`, stroke: CATEGORY_COLORS[row.category],
    });
    line.dataset.seq = row.id;
    svg.appendChild(line);
    row.anchors.forEach((present, k) => {
      if (present) svg.appendChild(el("circle", { cx: colX(k), cy: y, r: 3, class: "anchor" }));
    });
  });

  for (const agg of payload.aggregates) {
    const k = payload.columns.indexOf(agg.cause);
    if (k < 0) continue;
    const y0 = 30 + agg.row_start * rowH + 2;
    const y1 = 30 + (agg.row_end + 1) * rowH - 2;
    const rect = el("rect", {
      x: colX(k) - 8, y: y0, width: 16, height: y1 - y0, rx: 7, class: "aggregate",
    });
    rect.dataset.cause = agg.cause;
    rect.dataset.rowStart = String(agg.row_start);
    rect.dataset.rowEnd = String(agg.row_end);
    svg.appendChild(rect);
  }

  // per-category fit score colors the right edge strip
  let y2 = 30;
  for (const cat of order) {
    const count = payload.groups[cat] ?? 0;
    const score = payload.group_likelihood[cat];
    if (count > 0 && score !== undefined) {
      const strip = el("rect", {
        x: width - 110, y: y2, width: 20, height: count * rowH,
        fill: `hsl(214, 70%, ${(90 - 50 * score).toFixed(0)}%)`, class: "fit-strip",
      });
      strip.dataset.score = String(score);
      strip.dataset.category = cat;
      svg.appendChild(strip);
    }
    y2 += count * rowH;
  }

  container.appendChild(svg);
}

export function renderDiagnostics(
  container: HTMLElement,
  records: DiagnosticsRecord[],
  onRevert?: (iteration: number) => void,
): void {
  container.innerHTML = "";
  if (!records.length) return;
  const w = 420;
  const h = 180;
  const padL = 50;
  const padB = 26;
  const svg = el("svg", { viewBox: `0 0 ${w} ${h}`, class: "diagnostics-view" });

  const means = records.map((r) => r.nll_mean);
  const stds = records.map((r) => r.nll_std);
  const lo = Math.min(...means.map((m, i) => m - stds[i]));
  const hi = Math.max(...means.map((m, i) => m + stds[i]));
  const span = hi - lo || 1;
  const x = (i: number) => padL + (i * (w - padL - 20)) / Math.max(records.length - 1, 1);
  const y = (v: number) => 10 + ((hi - v) / span) * (h - padB - 20);

  records.forEach((rec, i) => {
    svg.appendChild(el("line", {
      x1: x(i), y1: y(rec.nll_mean - rec.nll_std),
      x2: x(i), y2: y(rec.nll_mean + rec.nll_std), class: "errorbar",
    }));
    const better = i === 0 || rec.bic <= records[i - 1].bic;
    const dot = el("circle", {
      cx: x(i), cy: y(rec.nll_mean), r: 7,
      fill: better ? "#2e9e44" : "#d93025", class: "diag-point",
    });
    dot.dataset.iter = String(rec.iter);
    dot.dataset.bic = String(rec.bic);
    dot.dataset.p = String(rec.p);
    if (rec.auroc !== null && rec.auroc !== undefined) dot.dataset.auroc = String(rec.auroc);
    const tip = el("title");
    tip.textContent =
      `iter ${rec.iter}: nll ${rec.nll_mean.toFixed(3)} ± ${rec.nll_std.toFixed(3)}, ` +
      `BIC ${rec.bic.toFixed(1)}, p ${rec.p.toFixed(3)}`;
    dot.appendChild(tip);
    dot.addEventListener("click", () => onRevert?.(rec.iter));
    svg.appendChild(dot);
    const label = el("text", { x: x(i), y: h - 8, "text-anchor": "middle", class: "axis-label" });
    label.textContent = String(rec.iter);
    svg.appendChild(label);
  });

  container.appendChild(svg);
}

export function renderComparison(container: HTMLElement, payload: ComparisonPayload): void {
  container.innerHTML = "";
  const types = payload.types;
  const cell = 30;
  const pad = 60;
  const size = pad + types.length * cell + 10;
  const svg = el("svg", { viewBox: `0 0 ${size} ${size}`, class: "comparison-view" });
  const maxS = Math.max(...payload.cells.map((c) => Math.max(c.strength_1, c.strength_2)), 0);
  const sat = (v: number) => (maxS > 0 ? v / maxS : 0);

  types.forEach((t, i) => {
    const colLabel = el("text", {
      x: pad + i * cell + cell / 2, y: pad - 8, "text-anchor": "middle", class: "axis-label",
    });
    colLabel.textContent = t;
    svg.appendChild(colLabel);
    const rowLabel = el("text", {
      x: pad - 8, y: pad + i * cell + cell / 2 + 4, "text-anchor": "end", class: "axis-label",
    });
    rowLabel.textContent = t;
    svg.appendChild(rowLabel);
  });

  for (const c of payload.cells) {
    const row = types.indexOf(c.cause);
    const col = types.indexOf(c.effect);
    if (row < 0 || col < 0) continue;
    const x = pad + col * cell;
    const y = pad + row * cell;
    const g = el("g", { class: `cell ${c.category}` });
    (g as SVGGElement).dataset.cause = c.cause;
    (g as SVGGElement).dataset.effect = c.effect;
    (g as SVGGElement).dataset.category = c.category;
    // outer region: first group; inner region: second group
    g.appendChild(el("rect", {
      x, y, width: cell - 2, height: cell - 2,
      fill: `hsl(214, 70%, ${(95 - 55 * sat(c.strength_1)).toFixed(0)}%)`, class: "outer",
    }));
    g.appendChild(el("rect", {
      x: x + 6, y: y + 6, width: cell - 14, height: cell - 14,
      fill: `hsl(28, 80%, ${(95 - 55 * sat(c.strength_2)).toFixed(0)}%)`, class: "inner",
    }));
    const tip = el("title");
    tip.textContent = `${c.cause} -> ${c.effect}: ${c.category} (${c.strength_1.toFixed(4)} vs ${c.strength_2.toFixed(4)})`;
    g.appendChild(tip);
    svg.appendChild(g);
  }

  container.appendChild(svg);
}
