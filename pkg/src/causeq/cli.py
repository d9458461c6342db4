"""Batch command-line interface.

Every verb reads and writes the same json formats the HTTP API speaks,
exits 0 on success, and prints a machine-readable error object on stderr
otherwise.  Outputs are deterministic for a given seed, so piped runs
can be compared byte for byte.
"""

import argparse
import json
import sys

from . import diagnostics as diag
from .events import ingest, read_dataset, write_dataset
from .history import AnalysisSnapshot, compare, comparison_json
from .layout import LayoutInput, compute_layout
from .hawkes import CausalGraph, HawkesModel, default_kernel_bank
from .learner import (
    DEFAULT_STRENGTH_THRESHOLD,
    FeedbackSet,
    FitConfig,
    default_coverage_window,
    extract_graph,
    fit,
    refit_with_feedback,
)
from .patterns import PatternQuery, summarize


def _dump(obj, path=None):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _pairs(values, vocabulary):
    index = {n: i for i, n in enumerate(vocabulary)}
    pairs = []
    for raw in values or ():
        parts = raw.split(",")
        if len(parts) != 2:
            raise ValueError(f"expected CAUSE,EFFECT but got {raw!r}")
        c, e = parts
        if c not in index or e not in index:
            raise ValueError(f"unknown event type in pair {raw!r}")
        pairs.append((index[c], index[e]))
    return pairs


def _config_from(args):
    return FitConfig(
        alpha=args.alpha,
        alpha_u=getattr(args, "alpha_u", args.alpha),
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
    )


def cmd_ingest(args):
    with open(args.input) as fh:
        content = fh.read()
    sidecar = _load_json(args.sidecar) if args.sidecar else None
    ds = ingest(content, args.format, sidecar=sidecar)
    if args.out:
        write_dataset(ds, args.out)
    _dump({"vocabulary": ds.vocabulary, "sequences": len(ds.sequences),
           "events": ds.total_events()})


def cmd_simulate(args):
    model = HawkesModel.from_json(_load_json(args.truth))
    ds = diag.simulate(model, args.n, args.horizon, args.seed)
    write_dataset(ds, args.out)
    _dump({"sequences": len(ds.sequences), "events": ds.total_events(),
           "vocabulary": ds.vocabulary})


def cmd_fit(args):
    ds = read_dataset(args.data)
    config = _config_from(args)
    kernels = default_kernel_bank(ds)
    model, report = fit(ds, config, kernels)
    _dump(model.to_json(), args.out)
    if args.report:
        _dump({"objective_trace": report.objective_trace,
               "iterations": report.iterations_run,
               "converged": report.converged,
               "nll": report.final_nll}, args.report)


def cmd_refit(args):
    ds = read_dataset(args.data)
    prior = HawkesModel.from_json(_load_json(args.model))
    feedback = FeedbackSet(
        confirmed=_pairs(args.confirm, ds.vocabulary),
        removed=_pairs(args.remove, ds.vocabulary),
    )
    config = _config_from(args)
    model, report = refit_with_feedback(ds, prior, feedback, config)
    _dump(model.to_json(), args.out)
    if args.report:
        _dump({"objective_trace": report.objective_trace,
               "iterations": report.iterations_run,
               "converged": report.converged,
               "nll": report.final_nll}, args.report)


def cmd_graph(args):
    ds = read_dataset(args.data)
    model = HawkesModel.from_json(_load_json(args.model))
    window = args.window or default_coverage_window(model.kernels)
    graph = extract_graph(model, ds, args.strength_min, window)
    _dump(graph.to_json(), args.out)


def cmd_layout(args):
    graph = CausalGraph.from_json(_load_json(args.graph))
    w, h = (float(v) for v in args.canvas.split("x"))
    prev = _load_json(args.previous)["positions"] if args.previous else None
    result = compute_layout(LayoutInput(graph=graph, canvas=(w, h),
                                        previous_positions=prev,
                                        node_radius=args.node_radius))
    _dump(result.to_json(), args.out)


def cmd_patterns(args):
    ds = read_dataset(args.data)
    model = HawkesModel.from_json(_load_json(args.model)) if args.model else None
    names = ds.vocabulary
    potential = [names.index(p) for p in (args.potential.split(",") if args.potential else [])]
    window = args.window or (default_coverage_window(model.kernels) if model else 1.0)
    q = PatternQuery(cause=names.index(args.cause), effect=names.index(args.effect),
                     window=window, potential_causes=potential)
    summary = summarize(model, ds, q, seed=args.seed)
    _dump(summary.to_json(names, q.potential_causes), args.out)


def cmd_compare(args):
    s1 = AnalysisSnapshot.from_json(_load_json(args.a))
    s2 = AnalysisSnapshot.from_json(_load_json(args.b))
    cells = compare(s1, s2, args.epsilon)
    union = list(s1.vocabulary) + [t for t in s2.vocabulary if t not in s1.vocabulary]
    _dump(comparison_json(cells, union), args.out)


def cmd_experiment(args):
    ds = read_dataset(args.data)
    truth_obj = _load_json(args.truth_graph)
    index = {n: i for i, n in enumerate(ds.vocabulary)}
    edges = [(index[c], index[e]) for c, e in truth_obj["edges"]]
    truth = diag.GroundTruthGraph.from_edges(ds.num_types, edges)
    config = _config_from(args)
    records = diag.scripted_feedback_experiment(ds, truth, config, args.iters)
    table = [r.to_json() for r in records]
    _dump({"records": table}, args.out)
    header = f"{'iter':>4} {'nll_mean':>12} {'nll_std':>12} {'bic':>14} {'p':>8} {'auroc':>7}"
    lines = [header]
    for r in table:
        auroc = f"{r['auroc']:.4f}" if r["auroc"] is not None else "-"
        lines.append(f"{r['iter']:>4} {r['nll_mean']:>12.4f} {r['nll_std']:>12.4f} "
                     f"{r['bic']:>14.2f} {r['p']:>8.4f} {auroc:>7}")
    sys.stdout.write("\n".join(lines) + "\n")


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir=args.data_dir, static_dir=args.static),
                host=args.host, port=args.port)


def _add_fit_options(p, refit=False):
    p.add_argument("--alpha", type=float, default=10.0)
    if refit:
        p.add_argument("--alpha-u", dest="alpha_u", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="causeq",
                                     description="Granger-causality engine for event sequences")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a raw stream into the canonical dataset format")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--sidecar")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="draw sequences from a ground-truth model")
    p.add_argument("--truth", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the Hawkes model by penalized MLE")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--report")
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("refit", help="refit under confirm/remove feedback")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--confirm", action="append", metavar="CAUSE,EFFECT")
    p.add_argument("--remove", action="append", metavar="CAUSE,EFFECT")
    p.add_argument("--out")
    p.add_argument("--report")
    _add_fit_options(p, refit=True)
    p.set_defaults(func=cmd_refit)

    p = sub.add_parser("graph", help="extract the causal graph from a fitted model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--strength-min", type=float, default=DEFAULT_STRENGTH_THRESHOLD)
    p.add_argument("--window", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("layout", help="compute node positions for a graph json")
    p.add_argument("--graph", required=True)
    p.add_argument("--canvas", default="1200x800")
    p.add_argument("--node-radius", type=float, default=20.0)
    p.add_argument("--previous", help="layout json to stabilize against")
    p.add_argument("--out")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("patterns", help="three-category subsequence summary for an edge")
    p.add_argument("--data", required=True)
    p.add_argument("--model")
    p.add_argument("--cause", required=True)
    p.add_argument("--effect", required=True)
    p.add_argument("--window", type=float)
    p.add_argument("--potential", help="comma-separated other causes to anchor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("compare", help="five-category comparison of two snapshots")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="scripted feedback experiment against a ground truth")
    p.add_argument("--data", required=True)
    p.add_argument("--truth-graph", required=True, help="json with {'edges': [[cause, effect], ...]}")
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--out")
    _add_fit_options(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--data-dir")
    p.add_argument("--static")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "alpha_u", None) is None and hasattr(args, "alpha"):
        args.alpha_u = args.alpha
    try:
        args.func(args)
    except Exception as exc:  # surface every failure as machine-readable json
        sys.stderr.write(json.dumps({"error": str(exc), "type": type(exc).__name__}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
