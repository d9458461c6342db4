"""HTTP API driving the steering UI.

Sessions own the iterative refinement loop: the graph served to clients
is always reconstructible from (current model, cumulative feedback, view
thresholds); refits are atomic per session and at most one runs at a
time (409 otherwise).  Layouts are cached per view signature so an
unchanged graph yields identical positions, and re-layouts after a graph
change are stabilized against the previous positions.
"""

import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import diagnostics as diag
from . import patterns as pat
from .events import IngestError, Query, coverage, ingest, query as run_query
from .hawkes import CausalGraph, default_kernel_bank
from .history import AnalysisSnapshot, SnapshotStore, SnapshotNotFound, compare, comparison_json
from .layout import LayoutInput, assign_depths, detect_circles, remove_overlaps, solve_positions
from .learner import (
    DEFAULT_STRENGTH_THRESHOLD,
    FeedbackSet,
    FitConfig,
    default_coverage_window,
    extract_graph,
    fit,
    refit_with_feedback,
)

DEFAULT_PORT = 8700


@dataclass
class Session:
    id: str
    dataset: object
    kernels: object
    config: FitConfig
    strength_threshold: float
    coverage_window: float
    models: list
    diagnostics: list
    feedback: FeedbackSet = field(default_factory=FeedbackSet)
    feedback_history: list = field(default_factory=list)
    explored_frontier: set = field(default_factory=set)
    layout_cache: dict = field(default_factory=dict)
    last_positions: dict = None
    refit_lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def model(self):
        return self.models[-1]

    def base_graph(self):
        """extract_graph of the current model plus feedback overlays."""
        graph = extract_graph(self.model, self.dataset, self.strength_threshold,
                              self.coverage_window)
        emap = graph.edge_map()
        names = self.dataset.vocabulary
        for c, e in self.feedback.confirmed:
            key = (names[c], names[e])
            if key in emap:
                emap[key].confirmed = True
        for c, e in self.feedback.removed:
            key = (names[c], names[e])
            if key in emap:
                emap[key].removed = True
        return graph

    def view_graph(self, strength_min=0.0, coverage_min=0.0):
        graph = self.base_graph()
        frontier = self.explored_frontier or set(graph.nodes)
        nodes = [n for n in graph.nodes if n in frontier]
        edges = [e for e in graph.edges
                 if e.cause in frontier and e.effect in frontier
                 and e.strength >= strength_min and e.coverage >= coverage_min]
        return CausalGraph(nodes=nodes, edges=edges)


def _bad(detail):
    raise HTTPException(status_code=400, detail=detail)


def _get(mapping, key, what):
    if key not in mapping:
        raise HTTPException(status_code=404, detail=f"unknown {what}: {key}")
    return mapping[key]


def create_app(data_dir=None, static_dir=None):
    data_dir = Path(data_dir or os.environ.get("CAUSEQ_DATA", "causeq-data"))
    app = FastAPI(title="causeq")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    datasets = {}
    sessions = {}
    store = SnapshotStore(data_dir / "snapshots")
    counters = {"dataset": 0, "session": 0}
    app.state.datasets = datasets
    app.state.sessions = sessions
    app.state.store = store

    def next_id(kind):
        counters[kind] += 1
        return f"{kind[0]}-{counters[kind]:04d}"

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/datasets", status_code=201)
    def post_dataset(body: dict):
        fmt = body.get("format", "jsonl")
        content = body.get("content")
        if not isinstance(content, str):
            _bad("body must carry the event stream in 'content'")
        try:
            ds = ingest(content, fmt, sidecar=body.get("sidecar"))
        except IngestError as exc:
            _bad(str(exc))
        ds_id = next_id("dataset")
        datasets[ds_id] = ds
        return {"id": ds_id, "vocabulary": ds.vocabulary, "sequences": len(ds.sequences)}

    @app.get("/datasets/{ds_id}/coverage")
    def get_coverage(ds_id: str):
        ds = _get(datasets, ds_id, "dataset")
        if ds.is_empty:
            return {"coverage": []}
        return {"coverage": [
            {"type": ds.vocabulary[tid], "count": count, "rate": rate}
            for tid, count, rate in coverage(ds)
        ]}

    @app.post("/sessions", status_code=201)
    def post_session(body: dict):
        ds = _get(datasets, body.get("dataset_id"), "dataset")
        q = Query.from_json(body.get("query", {}))
        for name in q.include_events | q.exclude_events:
            if name not in ds.vocabulary:
                _bad(f"unknown event type in query: {name}")
        sub = run_query(ds, q)
        if sub.is_empty:
            _bad("query matched no sequences; refusing to fit on an empty result")
        config = FitConfig.from_json(body.get("fit", {}))
        kernels = default_kernel_bank(sub)
        model, report = fit(sub, config, kernels)
        session = Session(
            id=next_id("session"),
            dataset=sub,
            kernels=kernels,
            config=config,
            strength_threshold=float(body.get("strength_threshold", DEFAULT_STRENGTH_THRESHOLD)),
            coverage_window=float(body.get("coverage_window") or default_coverage_window(kernels)),
            models=[model],
            diagnostics=[diag.evaluate(model, sub)],
        )
        session.feedback_history = [session.feedback]
        outcome = body.get("outcome")
        if outcome:
            if outcome not in sub.vocabulary:
                _bad(f"outcome event {outcome!r} not in the queried vocabulary")
            session.explored_frontier = {outcome}
        sessions[session.id] = session
        return {
            "id": session.id,
            "vocabulary": sub.vocabulary,
            "graph": session.view_graph().to_json(),
            "diagnostics": [d.to_json() for d in session.diagnostics],
            "converged": report.converged,
        }

    @app.get("/sessions/{sid}/graph")
    def get_graph(sid: str, outcome: str = None, strength_min: float = 0.0,
                        coverage_min: float = 0.0):
        session = _get(sessions, sid, "session")
        if outcome:
            if outcome not in session.dataset.vocabulary:
                _bad(f"unknown outcome event {outcome!r}")
            session.explored_frontier.add(outcome)
        return session.view_graph(strength_min, coverage_min).to_json()

    @app.post("/sessions/{sid}/expand")
    def post_expand(sid: str, body: dict):
        session = _get(sessions, sid, "session")
        event = body.get("event")
        if event not in session.dataset.vocabulary:
            _bad(f"unknown event {event!r}")
        graph = session.base_graph()
        frontier = session.explored_frontier or set(graph.nodes)
        causes = {e.cause for e in graph.visible_edges() if e.effect == event}
        new_nodes = sorted(causes - frontier - {event})
        session.explored_frontier = frontier | causes | {event}
        view = session.view_graph()
        new_edges = [e.to_json() for e in view.edges
                     if e.effect == event and e.cause in causes]
        return {"new_nodes": new_nodes, "new_edges": new_edges, "graph": view.to_json()}

    @app.post("/sessions/{sid}/feedback")
    def post_feedback(sid: str, body: dict):
        session = _get(sessions, sid, "session")
        names = session.dataset.vocabulary
        index = {n: i for i, n in enumerate(names)}

        def resolve(pairs):
            out = []
            for pair in pairs or ():
                c, e = pair
                if c not in index or e not in index:
                    _bad(f"unknown event type in feedback pair {pair}")
                out.append((index[c], index[e]))
            return out

        confirmed = resolve(body.get("confirmed"))
        removed = resolve(body.get("removed"))
        try:
            session.feedback = session.feedback.merged_with(confirmed, removed)
        except ValueError as exc:
            _bad(str(exc))
        return {"feedback": session.feedback.to_json(names),
                "graph": session.view_graph().to_json()}

    @app.post("/sessions/{sid}/refit")
    def post_refit(sid: str):
        session = _get(sessions, sid, "session")
        if not session.refit_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a refit is already running for this session")
        try:
            model, report = refit_with_feedback(session.dataset, session.model,
                                                session.feedback, session.config)
            record = diag.evaluate(model, session.dataset, prev=session.diagnostics[-1])
            # commit only after everything succeeded: /refit is atomic
            session.models.append(model)
            session.diagnostics.append(record)
            session.feedback_history.append(session.feedback)
            session.layout_cache.clear()
        finally:
            session.refit_lock.release()
        layout = _layout_for(session)
        return {
            "graph": session.view_graph().to_json(),
            "diagnostics": [d.to_json() for d in session.diagnostics],
            "layout": layout.to_json(),
            "converged": report.converged,
        }

    def _layout_for(session):
        view = session.view_graph()
        signature = (tuple(view.nodes),
                     tuple(sorted((e.cause, e.effect, e.strength) for e in view.visible_edges())))
        if signature in session.layout_cache:
            return session.layout_cache[signature]
        inp = LayoutInput(graph=view, previous_positions=session.last_positions)
        circles = detect_circles(view)
        depths = assign_depths(view, circles)
        result = remove_overlaps(solve_positions(inp, depths, circles), inp.node_radius)
        session.layout_cache = {signature: result}
        session.last_positions = dict(result.positions)
        return result

    @app.get("/sessions/{sid}/layout")
    def get_layout(sid: str):
        session = _get(sessions, sid, "session")
        return _layout_for(session).to_json()

    @app.get("/sessions/{sid}/patterns")
    def get_patterns(sid: str, cause: str, effect: str, window: float = None):
        session = _get(sessions, sid, "session")
        names = session.dataset.vocabulary
        for name in (cause, effect):
            if name not in names:
                _bad(f"unknown event type {name!r}")
        window = window or session.coverage_window
        graph = session.base_graph()
        potential = [names.index(e.cause) for e in graph.visible_edges()
                     if e.effect == effect and e.cause != cause]
        try:
            q = pat.PatternQuery(cause=names.index(cause), effect=names.index(effect),
                                 window=window, potential_causes=potential)
        except ValueError as exc:
            _bad(str(exc))
        summary = pat.summarize(session.model, session.dataset, q, seed=session.config.seed)
        return summary.to_json(names, q.potential_causes)

    @app.get("/sessions/{sid}/path-flow")
    def get_path_flow(sid: str, path: str, window: float = None):
        session = _get(sessions, sid, "session")
        names = session.dataset.vocabulary
        parts = [p for p in path.split(",") if p]
        if len(parts) < 2:
            _bad("path must name at least two events, comma-separated")
        for name in parts:
            if name not in names:
                _bad(f"unknown event type {name!r}")
        window = window or session.coverage_window
        steps = pat.causal_path_flow(session.dataset, [names.index(p) for p in parts], window)
        for step in steps:
            step["from"] = names[step["from"]]
            step["to"] = names[step["to"]]
        return {"steps": steps}

    @app.get("/sessions/{sid}/diagnostics")
    def get_diagnostics(sid: str):
        session = _get(sessions, sid, "session")
        return {"records": [d.to_json() for d in session.diagnostics]}

    @app.post("/sessions/{sid}/snapshot", status_code=201)
    def post_snapshot(sid: str, body: dict = None):
        session = _get(sessions, sid, "session")
        query_obj = (body or {}).get("query", {})
        snapshot = AnalysisSnapshot(
            id="",
            created_at="",
            vocabulary=list(session.dataset.vocabulary),
            query=Query.from_json(query_obj),
            graph=session.base_graph(),
            feedback_history=list(session.feedback_history),
            diagnostics=list(session.diagnostics),
            model=session.model,
        )
        return {"id": store.save(snapshot)}

    @app.get("/snapshots")
    def get_snapshots():
        return {"snapshots": store.list()}

    @app.get("/compare")
    def get_compare(a: str, b: str, epsilon: float = 0.05):
        try:
            s1, s2 = store.load(a), store.load(b)
        except SnapshotNotFound as exc:
            raise HTTPException(status_code=404, detail=f"unknown snapshot: {exc.args[0]}")
        cells = compare(s1, s2, epsilon)
        union = list(s1.vocabulary) + [t for t in s2.vocabulary if t not in s1.vocabulary]
        return comparison_json(cells, union)

    @app.post("/sessions/{sid}/revert")
    def post_revert(sid: str, body: dict):
        session = _get(sessions, sid, "session")
        iteration = body.get("iteration")
        if not isinstance(iteration, int) or not (0 <= iteration < len(session.models)):
            _bad(f"iteration must be in [0, {len(session.models) - 1}]")
        session.models = session.models[:iteration + 1]
        session.diagnostics = session.diagnostics[:iteration + 1]
        session.feedback_history = session.feedback_history[:iteration + 1]
        session.feedback = session.feedback_history[-1]
        session.layout_cache.clear()
        return {
            "graph": session.view_graph().to_json(),
            "diagnostics": [d.to_json() for d in session.diagnostics],
        }

    static = static_dir or os.environ.get("CAUSEQ_STATIC")
    if static and Path(static).is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="ui")

    return app


def main():
    import uvicorn

    port = int(os.environ.get("CAUSEQ_PORT", DEFAULT_PORT))
    default_static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    uvicorn.run(create_app(static_dir=default_static if default_static.is_dir() else None),
                host="127.0.0.1", port=port)


if __name__ == "__main__":
    main()
