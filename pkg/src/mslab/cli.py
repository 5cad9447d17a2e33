"""Command-line entry point: gen | run | metrics | sweep | theorycheck.

Flags may also be supplied through a flat `key = value` config file whose
keys equal the long flag names; explicit flags override file values.  Every
subcommand honors --seed, and repeated invocations with the same seed write
byte-identical outputs.  The MSLAB_WORKERS environment variable caps sweep
parallelism.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .clusters import contingency, extract_clusters, purity_metrics
from .engine import ALGORITHMS, TRACE_LEVELS, RunConfig, run
from .experiments import (
    DEFAULT_M_VALUES,
    DEFAULT_N_GRID,
    DEFAULT_RATIOS,
    DEFAULT_WIDTHS,
    SWEEP_KINDS,
    SWEEPS,
    SweepResult,
    merge_radius_for,
    plotdata_tables,
)
from .kernels import KERNEL_ALPHAS, Profile
from .schedule import DEFAULT_EDGE_GUARD
from .synthdata import generate, paper_spec
from .theorychecks import format_results, run_theory_suite

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_MAX_ITER = 2


def _add_common_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("--input", required=True, help="points CSV")
    p.add_argument("--h", dest="h", type=float, default=0.6, help="fixed bandwidth")
    p.add_argument("--hmin", type=float, default=0.2)
    p.add_argument("--hmax", type=float, default=1.6)
    p.add_argument("--hinit", type=float, default=0.6)
    p.add_argument("--nu", default="paper-log", help="nu sequence spec")
    p.add_argument("--edge-guard", type=float, default=DEFAULT_EDGE_GUARD)
    p.add_argument("--max-iter", type=int, default=10_000_000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", choices=TRACE_LEVELS, default="shifts")
    p.add_argument("--kernel", choices=sorted(KERNEL_ALPHAS), default="biweight")
    p.add_argument("--merge-radius", type=float, default=None)
    p.add_argument(
        "--conv-fraction",
        type=float,
        default=1.0,
        help="fraction of points whose last shift must be small to stop",
    )
    p.add_argument("--out", required=True, help="trace JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mslab",
        description="Mean-shift clustering lab: runs, metrics, sweeps, theory checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate the synthetic mixture benchmark")
    g.add_argument("--config", default=None)
    g.add_argument("--n-per-cluster", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--spread", type=float, default=0.65)
    g.add_argument("--spread-is", choices=("variance", "stddev"), default="variance")
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run one clustering algorithm on a points CSV")
    r.add_argument("--config", default=None)
    _add_common_run_flags(r)

    m = sub.add_parser("metrics", help="purity metrics for an assignment CSV")
    m.add_argument("--config", default=None)
    m.add_argument("--pred", required=True, help="assignment CSV (point,cluster)")
    m.add_argument("--truth", required=True, help="labeled points CSV")
    m.add_argument("--out", default=None)

    s = sub.add_parser("sweep", help="run a benchmark sweep and aggregate")
    s.add_argument("--config", default=None)
    s.add_argument("--kind", choices=SWEEP_KINDS, required=True)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--n-grid", type=int, nargs="+", default=list(DEFAULT_N_GRID))
    s.add_argument("--widths", type=float, nargs="+", default=list(DEFAULT_WIDTHS))
    s.add_argument("--ratios", type=float, nargs="+", default=list(DEFAULT_RATIOS))
    s.add_argument("--m-values", type=int, nargs="+", default=list(DEFAULT_M_VALUES))
    s.add_argument("--spread-is", choices=("variance", "stddev"), default="variance")
    s.add_argument("--edge-guard", type=float, default=DEFAULT_EDGE_GUARD)
    s.add_argument("--ci-method", choices=("t", "bootstrap"), default="t")
    s.add_argument("--emit-plotdata", action="store_true")
    s.add_argument("--plot", action="store_true", help="render figures next to the CSV")
    s.add_argument("--out", required=True, help="results CSV path")

    t = sub.add_parser("theorycheck", help="run the theoretical-invariant suite")
    t.add_argument("--config", default=None)
    t.add_argument("--seeds", type=int, default=10)
    t.add_argument("--n-per-cluster", type=int, default=50)
    t.add_argument("--nu", default="paper-log")
    t.add_argument("--edge-guard", type=float, default=DEFAULT_EDGE_GUARD)
    t.add_argument("--out", default=None)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list) -> list:
    """Load --config key=value pairs as subcommand defaults, flags override."""
    if not argv or argv[0].startswith("-"):
        return argv
    try:
        pos = argv.index("--config")
        cfg_path = argv[pos + 1]
    except (ValueError, IndexError):
        return argv
    values = io.read_config(cfg_path)
    sub_actions = [
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    ]
    subparser = sub_actions[0].choices[argv[0]]
    coerced = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            key = opt.lstrip("-")
            if key in values:
                raw = values[key]
                if isinstance(action, argparse._StoreTrueAction):
                    coerced[action.dest] = raw.lower() in ("1", "true", "yes")
                elif action.nargs in ("+", "*"):
                    coerced[action.dest] = [
                        (action.type or str)(v) for v in raw.split()
                    ]
                elif action.type is not None:
                    coerced[action.dest] = action.type(raw)
                else:
                    coerced[action.dest] = raw
                action.required = False
    subparser.set_defaults(**coerced)
    return argv


def cmd_gen(args) -> int:
    spec = paper_spec(args.n_per_cluster, spread=args.spread, spread_is=args.spread_is)
    points, labels = generate(spec, args.seed)
    io.write_points(args.out, points, labels)
    print(f"wrote {points.shape[0]} points to {args.out}")
    return EXIT_OK


def _run_config_from(args) -> RunConfig:
    return RunConfig(
        algorithm=args.algo,
        profile=Profile.from_name(args.kernel),
        bandwidth=args.h,
        h_min=args.hmin,
        h_max=args.hmax,
        h_init=args.hinit,
        nu_spec=args.nu,
        edge_guard=args.edge_guard,
        max_iterations=args.max_iter,
        convergence_threshold=args.tol,
        seed=args.seed,
        trace_level=args.trace,
        convergence_fraction=args.conv_fraction,
    ).validate()


def cmd_run(args) -> int:
    try:
        points, labels = io.read_points(args.input)
    except (OSError, ValueError) as exc:
        print(f"error reading {args.input}: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        cfg = _run_config_from(args)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    trace = run(points, cfg)
    out = Path(args.out)
    io.write_trace_json(out, trace.to_dict())

    radius = args.merge_radius if args.merge_radius else merge_radius_for(cfg)
    clustering = extract_clusters(trace.final_state, radius)
    clusters_path = out.with_suffix(".clusters.csv")
    io.write_assignments(clusters_path, clustering.labels)

    record = {
        "algorithm": cfg.algorithm,
        "stop_reason": trace.stop_reason,
        "iterations": trace.iterations_used,
        "cluster_count": clustering.cluster_count,
        "merge_radius": radius,
    }
    if labels is not None:
        record.update(purity_metrics(clustering.labels, labels))
    metrics_path = out.with_suffix(".metrics.txt")
    io.write_record(metrics_path, record)

    print(
        f"{cfg.algorithm}: {trace.stop_reason} after {trace.iterations_used} "
        f"iterations, {clustering.cluster_count} clusters"
    )
    print(f"trace: {out}\nclusters: {clusters_path}\nmetrics: {metrics_path}")
    return EXIT_OK if trace.stop_reason == "converged" else EXIT_MAX_ITER


def cmd_metrics(args) -> int:
    try:
        pred = io.read_assignments(args.pred)
        points, labels = io.read_points(args.truth)
    except (OSError, ValueError) as exc:
        print(f"error reading inputs: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    if labels is None:
        print(f"{args.truth} carries no label column", file=sys.stderr)
        return EXIT_INPUT_ERROR
    if len(pred) != len(labels):
        print(
            f"length mismatch: {len(pred)} assignments, {len(labels)} labels",
            file=sys.stderr,
        )
        return EXIT_INPUT_ERROR
    record = purity_metrics(pred, labels)
    for key, value in record.items():
        print(f"{key} = {io.fmt(value)}")
    if args.out:
        io.write_record(args.out, record)
    return EXIT_OK


def _resolve_workers(requested) -> int:
    env = os.environ.get("MSLAB_WORKERS")
    cap = int(env) if env else None
    if requested is None:
        requested = cap if cap is not None else 1
    if cap is not None:
        requested = min(requested, cap)
    return max(1, requested)


def cmd_sweep(args) -> int:
    workers = _resolve_workers(args.workers)
    kw = dict(
        reps=args.reps,
        master_seed=args.seed,
        workers=workers,
        spread_is=args.spread_is,
        edge_guard=args.edge_guard,
        ci_method=args.ci_method,
    )
    if args.kind == "sparse":
        kw["n_values"] = tuple(args.n_grid)
    elif args.kind == "range":
        kw["widths"] = tuple(args.widths)
    elif args.kind == "imbalance":
        kw["ratios"] = tuple(args.ratios)
    else:
        kw["m_values"] = tuple(args.m_values)
    result: SweepResult = SWEEPS[args.kind](**kw)

    out = Path(args.out)
    io.write_csv(out, list(SweepResult.CSV_HEADER), result.csv_rows())
    written = [out]
    if args.emit_plotdata:
        for fig, header, rows in plotdata_tables(result):
            path = out.with_name(f"{out.stem}_{fig}.csv")
            io.write_csv(path, list(header), rows)
            written.append(path)
    if args.plot:
        from .plotting import render_figures

        written.extend(render_figures(result, out))
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_theorycheck(args) -> int:
    results = run_theory_suite(
        seeds=tuple(range(args.seeds)),
        n_per_cluster=args.n_per_cluster,
        nu_spec=args.nu,
        edge_guard=args.edge_guard,
    )
    report = format_results(results)
    print(report)
    if args.out:
        Path(args.out).write_text(report + "\n", encoding="utf-8")
    return EXIT_OK if all(r.passed for r in results) else 1


_COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
    "theorycheck": cmd_theorycheck,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    argv = _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
