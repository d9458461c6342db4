import type {
  ComparisonPayload,
  DiagnosticsRecord,
  ExpandResponse,
  GraphPayload,
  LayoutPayload,
  PathFlowStep,
  PatternsPayload,
  RefitResponse,
  SessionResponse,
  SnapshotInfo,
} from "./types.js";

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let detail = res.statusText;
    try {
      detail = (await res.json()).detail ?? detail;
    } catch {
      /* non-json error body */
    }
    throw new Error(`${res.status}: ${detail}`);
  }
  return res.json() as Promise<T>;
}

function post<T>(url: string, body: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string, params?: Record<string, string | number | undefined>) {
    let qs = "";
    if (params) {
      const pairs = Object.entries(params)
        .filter(([, v]) => v !== undefined)
        .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`);
      if (pairs.length) qs = `?${pairs.join("&")}`;
    }
    return `${this.base}${path}${qs}`;
  }

  ingestDataset(content: string, format = "jsonl", sidecar?: unknown) {
    return post<{ id: string; vocabulary: string[]; sequences: number }>(
      this.url("/datasets"), { content, format, sidecar });
  }

  coverage(datasetId: string) {
    return request<{ coverage: { type: string; count: number; rate: number }[] }>(
      this.url(`/datasets/${datasetId}/coverage`));
  }

  createSession(body: unknown) {
    return post<SessionResponse>(this.url("/sessions"), body);
  }

  graph(sessionId: string, params: { outcome?: string; strength_min?: number; coverage_min?: number } = {}) {
    return request<GraphPayload>(this.url(`/sessions/${sessionId}/graph`, params));
  }

  layout(sessionId: string) {
    return request<LayoutPayload>(this.url(`/sessions/${sessionId}/layout`));
  }

  expand(sessionId: string, event: string) {
    return post<ExpandResponse>(this.url(`/sessions/${sessionId}/expand`), { event });
  }

  sendFeedback(sessionId: string, confirmed: [string, string][], removed: [string, string][]) {
    return post<{ feedback: unknown; graph: GraphPayload }>(
      this.url(`/sessions/${sessionId}/feedback`), { confirmed, removed });
  }

  refit(sessionId: string) {
    return post<RefitResponse>(this.url(`/sessions/${sessionId}/refit`), {});
  }

  patterns(sessionId: string, cause: string, effect: string, window?: number) {
    return request<PatternsPayload>(
      this.url(`/sessions/${sessionId}/patterns`, { cause, effect, window }));
  }

  pathFlow(sessionId: string, path: string[], window?: number) {
    return request<{ steps: PathFlowStep[] }>(
      this.url(`/sessions/${sessionId}/path-flow`, { path: path.join(","), window }));
  }

  diagnostics(sessionId: string) {
    return request<{ records: DiagnosticsRecord[] }>(
      this.url(`/sessions/${sessionId}/diagnostics`));
  }

  revert(sessionId: string, iteration: number) {
    return post<{ graph: GraphPayload; diagnostics: DiagnosticsRecord[] }>(
      this.url(`/sessions/${sessionId}/revert`), { iteration });
  }

  snapshot(sessionId: string) {
    return post<{ id: string }>(this.url(`/sessions/${sessionId}/snapshot`), {});
  }

  snapshots() {
    return request<{ snapshots: SnapshotInfo[] }>(this.url("/snapshots"));
  }

  compare(a: string, b: string, epsilon = 0.05) {
    return request<ComparisonPayload>(this.url("/compare", { a, b, epsilon }));
  }
}
