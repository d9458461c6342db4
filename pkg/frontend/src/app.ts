// Controller: owns the view state, talks to the server, re-renders.
// Analysis truth lives server-side only; a full reload followed by
// refresh() reproduces the identical view from session state alone.

import { ApiClient } from "./api.js";
import {
  clearPending,
  hasPending,
  initialState,
  stageConfirm,
  stageRemove,
  ViewState,
} from "./state.js";
import {
  renderComparison,
  renderDiagnostics,
  renderGraph,
  renderPatterns,
} from "./render.js";
import type { GraphPayload, LayoutPayload } from "./types.js";

export interface AppElements {
  graph: HTMLElement;
  patterns: HTMLElement;
  diagnostics: HTMLElement;
  comparison: HTMLElement;
  history: HTMLElement;
  notice: HTMLElement;
}

export class App {
  state: ViewState = initialState();
  lastGraph: GraphPayload | null = null;
  lastLayout: LayoutPayload | null = null;

  constructor(public api: ApiClient, public els: AppElements) {}

  async attach(sessionId: string): Promise<void> {
    this.state = initialState();
    this.state.sessionId = sessionId;
    await this.refresh();
  }

  /** Re-fetch everything the view shows from the server. */
  async refresh(): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) return;
    const [graph, layout, diag] = await Promise.all([
      this.api.graph(sid, {
        strength_min: this.state.strengthMin,
        coverage_min: this.state.coverageMin,
      }),
      this.api.layout(sid),
      this.api.diagnostics(sid),
    ]);
    this.renderGraphView(graph, layout);
    renderDiagnostics(this.els.diagnostics, diag.records, (it) => void this.revert(it));
    if (this.state.selectedEdge) await this.showPatterns(...this.state.selectedEdge);
  }

  renderGraphView(graph: GraphPayload, layout: LayoutPayload): void {
    this.lastGraph = graph;
    this.lastLayout = layout;
    renderGraph(this.els.graph, graph, layout, this.state, {
      onSelectEdge: (pair) => {
        this.state.selectedEdge = pair;
        void this.showPatterns(...pair);
        this.rerenderGraphOnly();
      },
      onExpand: (node) => void this.expand(node),
    });
  }

  rerenderGraphOnly(): void {
    if (this.lastGraph && this.lastLayout) {
      this.renderGraphView(this.lastGraph, this.lastLayout);
    }
  }

  async expand(node: string): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) return;
    const delta = await this.api.expand(sid, node);
    if (delta.new_nodes.length === 0) {
      this.notify("causal chain complete: no new events");
    } else {
      this.state.highlighted = delta.new_nodes;
    }
    const layout = await this.api.layout(sid);
    this.renderGraphView(delta.graph, layout);
  }

  confirmSelected(): boolean {
    if (!this.state.selectedEdge) return false;
    const ok = stageConfirm(this.state, this.state.selectedEdge);
    if (!ok) this.notify("edge is already staged for removal");
    this.rerenderGraphOnly();
    return ok;
  }

  removeSelected(): boolean {
    if (!this.state.selectedEdge) return false;
    const ok = stageRemove(this.state, this.state.selectedEdge);
    if (!ok) this.notify("edge is already staged for confirmation");
    this.rerenderGraphOnly();
    return ok;
  }

  /** "update model": ship the staged feedback, then exactly one refit. */
  async updateModel(): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid || !hasPending(this.state)) return;
    await this.api.sendFeedback(sid, this.state.pendingConfirmed, this.state.pendingRemoved);
    const result = await this.api.refit(sid);
    clearPending(this.state);
    this.state.highlighted = [];
    this.renderGraphView(result.graph, result.layout);
    renderDiagnostics(this.els.diagnostics, result.diagnostics,
                      (it) => void this.revert(it));
  }

  async revert(iteration: number): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) return;
    const out = await this.api.revert(sid, iteration);
    const layout = await this.api.layout(sid);
    this.renderGraphView(out.graph, layout);
    renderDiagnostics(this.els.diagnostics, out.diagnostics, (it) => void this.revert(it));
  }

  async showPatterns(cause: string, effect: string): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) return;
    try {
      const payload = await this.api.patterns(sid, cause, effect,
                                              this.state.window ?? undefined);
      renderPatterns(this.els.patterns, payload);
    } catch (exc) {
      this.notify(String(exc));
    }
  }

  async setWindow(window: number): Promise<void> {
    this.state.window = window;
    if (this.state.selectedEdge) await this.showPatterns(...this.state.selectedEdge);
  }

  async setThresholds(strengthMin: number, coverageMin: number): Promise<void> {
    this.state.strengthMin = strengthMin;
    this.state.coverageMin = coverageMin;
    await this.refresh();
  }

  async showHistory(): Promise<void> {
    const { snapshots } = await this.api.snapshots();
    const root = this.els.history;
    root.innerHTML = "";
    const picked: string[] = [];
    for (const snap of snapshots) {
      const item = document.createElement("div");
      item.className = "snapshot-item";
      item.dataset.id = snap.id;
      item.textContent = `${snap.id} — ${snap.created_at}`;
      item.addEventListener("click", () => {
        picked.push(snap.id);
        item.classList.add("picked");
        if (picked.length === 2) void this.showComparison(picked[0], picked[1]);
        if (picked.length > 2) picked.splice(0, picked.length - 2);
      });
      root.appendChild(item);
    }
  }

  async showComparison(a: string, b: string, epsilon = 0.05): Promise<void> {
    const payload = await this.api.compare(a, b, epsilon);
    renderComparison(this.els.comparison, payload);
  }

  async saveSnapshot(): Promise<string> {
    const sid = this.state.sessionId;
    if (!sid) throw new Error("no session");
    const { id } = await this.api.snapshot(sid);
    await this.showHistory();
    return id;
  }

  notify(message: string): void {
    this.els.notice.textContent = message;
    this.els.notice.classList.add("visible");
  }
}
