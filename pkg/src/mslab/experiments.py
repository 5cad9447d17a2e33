"""Sweep harness: repeated seeded runs, aggregation, delimited emission.

Every sweep derives its per-cell randomness from a master seed through
numpy's SeedSequence with a stable entropy tuple (master, repetition, role
tag, cell key), so results are reproducible, independent of worker count and
completion order, and adding sweep points never perturbs existing cells.
Within a repetition all algorithms (and, for the bandwidth-range sweep, all
widths) consume the identical dataset; the harness asserts this by digest.
"""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .clusters import extract_clusters, purity_metrics
from .engine import RunConfig, run
from .kernels import Profile
from .schedule import DEFAULT_EDGE_GUARD
from .synthdata import generate, imbalance_spec, paper_spec, ring_spec

log = logging.getLogger(__name__)

SWEEP_KINDS = ("sparse", "range", "imbalance", "count")
METRICS = ("cluster_count", "acp", "alp", "k")

TABLE_BANDWIDTH = 0.6
TABLE_RANGE = (0.2, 1.6)
TABLE_MAX_ITERATIONS = 10_000_000
TABLE_THRESHOLD = 1e-6

H_MIN_FLOOR = 0.05

DEFAULT_N_GRID = (10, 25, 50, 75, 100, 150, 200)
DEFAULT_WIDTHS = (0.0, 0.35, 0.7, 1.05, 1.4, 2.0, 2.5, 3.0)
DEFAULT_RATIOS = (1.0, 2.0, 3.0, 5.0, 8.0)
DEFAULT_M_VALUES = (2, 3, 4, 5, 6)

# role tags for seed derivation; arbitrary fixed integers
_DATA_TAG = 0xD474
_RUN_TAG = 0x52C5

# anchor chosen so that width 1.4 reproduces the [0.2, 1.6] operating range
_WIDTH_ANCHOR = (TABLE_BANDWIDTH - TABLE_RANGE[0]) / (TABLE_RANGE[1] - TABLE_RANGE[0])


def derive_seed(master: int, *key: int) -> int:
    """Stable per-cell seed: first 64-bit word of SeedSequence(master, *key)."""
    ss = np.random.SeedSequence(entropy=(int(master),) + tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _stable_key(value: float) -> int:
    return int(round(float(value) * 10**6))


def table_config(algorithm: str, seed, **overrides) -> RunConfig:
    """Benchmark hyperparameters: h 0.6, range [0.2, 1.6], 1e-6 threshold."""
    cfg = RunConfig(
        algorithm=algorithm,
        bandwidth=TABLE_BANDWIDTH,
        h_min=TABLE_RANGE[0],
        h_max=TABLE_RANGE[1],
        h_init=TABLE_BANDWIDTH,
        max_iterations=TABLE_MAX_ITERATIONS,
        convergence_threshold=TABLE_THRESHOLD,
        seed=seed,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg.validate()


def merge_radius_for(cfg: RunConfig) -> float:
    """Half the minimum bandwidth the run could have used."""
    return (cfg.h_min if cfg.algorithm == "dsms" else cfg.bandwidth) / 2.0


def run_cell(algorithm: str, points, labels, seed, **overrides) -> dict:
    """One algorithm run plus extraction and purity metrics."""
    cfg = table_config(algorithm, seed, **overrides)
    trace = run(points, cfg)
    clustering = extract_clusters(trace.final_state, merge_radius_for(cfg))
    rec = purity_metrics(clustering.labels, labels)
    rec["converged"] = trace.stop_reason == "converged"
    rec["iterations"] = trace.iterations_used
    return rec


def width_to_range(width: float, floor: float = H_MIN_FLOOR):
    """Map a bandwidth-range width to (h_min, h_max) containing 0.6.

    The range is anchored proportionally around the 0.6 operating bandwidth
    so that width 1.4 reproduces [0.2, 1.6] exactly; a lower end that would
    fall below `floor` is clamped there and the range widened upward.
    """
    if width < 0:
        raise ValueError("width must be non-negative")
    if width == 0.0:
        return TABLE_BANDWIDTH, TABLE_BANDWIDTH
    lo = TABLE_BANDWIDTH - _WIDTH_ANCHOR * width
    if lo < floor:
        log.warning(
            "width %.6g gives h_min %.6g below floor %.6g; clamping and widening upward",
            width,
            lo,
            floor,
        )
        lo = floor
    return lo, lo + width


_BOOTSTRAP_RESAMPLES = 2000
_BOOTSTRAP_SEED = 0x0B0075


def aggregate_ci(samples, level: float = 0.90, method: str = "t"):
    """Confidence interval for the mean: (mean, lo, hi) at the given level.

    The default is the Student-t interval; method="bootstrap" gives the
    percentile interval over resampled means (seeded, so deterministic),
    kept as a robustness cross-check.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples for a confidence interval")
    mean = float(x.mean())
    if method == "bootstrap":
        rng = np.random.Generator(np.random.PCG64(_BOOTSTRAP_SEED))
        idx = rng.integers(0, x.size, size=(_BOOTSTRAP_RESAMPLES, x.size))
        boot = x[idx].mean(axis=1)
        lo, hi = np.quantile(boot, [(1.0 - level) / 2.0, 0.5 + level / 2.0])
        return mean, float(lo), float(hi)
    if method != "t":
        raise ValueError(f"unknown CI method {method!r}")
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        return mean, mean, mean
    half = float(stats.t.ppf(0.5 + level / 2.0, x.size - 1)) * sd / np.sqrt(x.size)
    return mean, mean - half, mean + half


@dataclass(frozen=True)
class SweepRow:
    sweep_var: float
    algo: str
    metric: str
    mean: float
    ci_lo: float
    ci_hi: float
    reps: int


@dataclass
class SweepResult:
    """Aggregated sweep rows plus the raw per-repetition records."""

    kind: str
    rows: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)  # (sweep_var, algo) -> [record, ...]

    CSV_HEADER = ("sweep_var", "algo", "metric", "mean", "ci_lo", "ci_hi", "reps")

    def csv_rows(self):
        ordered = sorted(
            self.rows, key=lambda r: (r.sweep_var, r.algo, METRICS.index(r.metric))
        )
        return [
            (r.sweep_var, r.algo, r.metric, r.mean, r.ci_lo, r.ci_hi, r.reps)
            for r in ordered
        ]


def _digest(points: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(points).tobytes()).hexdigest()[:16]


def _aggregate(
    kind: str, cells: list, level: float = 0.90, ci_method: str = "t"
) -> SweepResult:
    """Fold per-cell records into CI rows; deterministic over sorted keys."""
    by_cell: dict = {}
    digests: dict = {}
    for rep, sweep_var, algo, digest, rec in cells:
        by_cell.setdefault((sweep_var, algo), []).append((rep, rec))
        digests.setdefault((rep, sweep_var), set()).add(digest)
    for (rep, sweep_var), seen in digests.items():
        if len(seen) != 1:
            raise AssertionError(
                f"dataset digest mismatch within repetition {rep} at {sweep_var}"
            )
    result = SweepResult(kind=kind)
    for sweep_var, algo in sorted(by_cell):
        recs = [rec for _, rec in sorted(by_cell[(sweep_var, algo)])]
        result.raw[(sweep_var, algo)] = recs
        for metric in METRICS:
            mean, lo, hi = aggregate_ci(
                [rec[metric] for rec in recs], level, ci_method
            )
            result.rows.append(
                SweepRow(float(sweep_var), algo, metric, mean, lo, hi, len(recs))
            )
    return result


def _map_jobs(job, args_list, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, args_list))
    return [job(a) for a in args_list]


# --- sparse-data sweep -----------------------------------------------------

def _sparse_rep(args):
    master, rep, n_values, algorithms, spread_is, edge_guard = args
    out = []
    run_seed = derive_seed(master, rep, _RUN_TAG)
    for n_per_cluster in n_values:
        data_seed = derive_seed(master, rep, _DATA_TAG, n_per_cluster)
        points, labels = generate(
            paper_spec(n_per_cluster, spread_is=spread_is), data_seed
        )
        digest = _digest(points)
        for algo in algorithms:
            rec = run_cell(
                algo, points, labels, run_seed, edge_guard=edge_guard
            )
            out.append((rep, n_per_cluster, algo, digest, rec))
    return out


def sweep_sparse(
    reps: int,
    n_values=DEFAULT_N_GRID,
    master_seed: int = 0,
    workers: int = 1,
    algorithms=("ms", "bms", "sms", "dsms"),
    spread_is: str = "variance",
    edge_guard: float = DEFAULT_EDGE_GUARD,
    ci_method: str = "t",
) -> SweepResult:
    """Cluster counts and purity versus points per cluster, all algorithms."""
    if reps < 2:
        raise ValueError("need reps >= 2")
    args = [
        (master_seed, rep, tuple(n_values), tuple(algorithms), spread_is, edge_guard)
        for rep in range(reps)
    ]
    cells = [cell for chunk in _map_jobs(_sparse_rep, args, workers) for cell in chunk]
    return _aggregate("sparse", cells, ci_method=ci_method)


# --- bandwidth-range sweep ---------------------------------------------------

def _range_rep(args):
    master, rep, ranges, n_per_cluster, spread_is, edge_guard = args
    run_seed = derive_seed(master, rep, _RUN_TAG)
    data_seed = derive_seed(master, rep, _DATA_TAG)
    points, labels = generate(paper_spec(n_per_cluster, spread_is=spread_is), data_seed)
    digest = _digest(points)
    out = []
    sms_rec = run_cell("sms", points, labels, run_seed, edge_guard=edge_guard)
    for width, h_min, h_max in ranges:
        rec = run_cell(
            "dsms",
            points,
            labels,
            run_seed,
            h_min=h_min,
            h_max=h_max,
            h_init=TABLE_BANDWIDTH,
            edge_guard=edge_guard,
        )
        out.append((rep, width, "dsms", digest, rec))
        out.append((rep, width, "sms", digest, sms_rec))
    return out


def sweep_bandwidth_range(
    reps: int,
    widths=DEFAULT_WIDTHS,
    master_seed: int = 0,
    workers: int = 1,
    n_per_cluster: int = 100,
    spread_is: str = "variance",
    edge_guard: float = DEFAULT_EDGE_GUARD,
    floor: float = H_MIN_FLOOR,
    ci_method: str = "t",
) -> SweepResult:
    """Purity versus bandwidth-range width; one shared dataset per repetition.

    The fixed-bandwidth baseline is run once per repetition and replicated
    across widths so plots can carry it as a reference line; at width 0 the
    doubly stochastic run degenerates to that baseline exactly, seed for seed.
    """
    if reps < 2:
        raise ValueError("need reps >= 2")
    ranges = tuple(
        (float(w),) + width_to_range(w, floor) for w in widths
    )
    args = [
        (master_seed, rep, ranges, n_per_cluster, spread_is, edge_guard)
        for rep in range(reps)
    ]
    cells = [cell for chunk in _map_jobs(_range_rep, args, workers) for cell in chunk]
    return _aggregate("range", cells, ci_method=ci_method)


# --- imbalance and cluster-count sweeps --------------------------------------

def _imbalance_rep(args):
    master, rep, ratios, total, spread_is, edge_guard = args
    run_seed = derive_seed(master, rep, _RUN_TAG)
    out = []
    for ratio in ratios:
        data_seed = derive_seed(master, rep, _DATA_TAG, _stable_key(ratio))
        points, labels = generate(
            imbalance_spec(ratio, total=total, spread_is=spread_is), data_seed
        )
        digest = _digest(points)
        for algo in ("sms", "dsms"):
            rec = run_cell(algo, points, labels, run_seed, edge_guard=edge_guard)
            out.append((rep, ratio, algo, digest, rec))
    return out


def sweep_imbalance(
    reps: int,
    ratios=DEFAULT_RATIOS,
    master_seed: int = 0,
    workers: int = 1,
    total: int = 200,
    spread_is: str = "variance",
    edge_guard: float = DEFAULT_EDGE_GUARD,
    ci_method: str = "t",
) -> SweepResult:
    """Purity versus the two-component cardinality ratio, sms and dsms."""
    if reps < 2:
        raise ValueError("need reps >= 2")
    args = [
        (master_seed, rep, tuple(ratios), total, spread_is, edge_guard)
        for rep in range(reps)
    ]
    cells = [
        cell for chunk in _map_jobs(_imbalance_rep, args, workers) for cell in chunk
    ]
    return _aggregate("imbalance", cells, ci_method=ci_method)


def _count_rep(args):
    master, rep, m_values, n_per_cluster, spread_is, edge_guard = args
    run_seed = derive_seed(master, rep, _RUN_TAG)
    out = []
    for m in m_values:
        data_seed = derive_seed(master, rep, _DATA_TAG, m)
        points, labels = generate(
            ring_spec(m, n_per_cluster, spread_is=spread_is), data_seed
        )
        digest = _digest(points)
        for algo in ("sms", "dsms"):
            rec = run_cell(algo, points, labels, run_seed, edge_guard=edge_guard)
            out.append((rep, m, algo, digest, rec))
    return out


def sweep_cluster_count(
    reps: int,
    m_values=DEFAULT_M_VALUES,
    master_seed: int = 0,
    workers: int = 1,
    n_per_cluster: int = 100,
    spread_is: str = "variance",
    edge_guard: float = DEFAULT_EDGE_GUARD,
    ci_method: str = "t",
) -> SweepResult:
    """Purity versus the number of ring-arranged components, sms and dsms."""
    if reps < 2:
        raise ValueError("need reps >= 2")
    args = [
        (master_seed, rep, tuple(m_values), n_per_cluster, spread_is, edge_guard)
        for rep in range(reps)
    ]
    cells = [cell for chunk in _map_jobs(_count_rep, args, workers) for cell in chunk]
    return _aggregate("count", cells, ci_method=ci_method)


SWEEPS = {
    "sparse": sweep_sparse,
    "range": sweep_bandwidth_range,
    "imbalance": sweep_imbalance,
    "count": sweep_cluster_count,
}

# figure layout: name -> (metrics shown, x-axis label)
PLOTDATA_FIGURES = {
    "sparse": (("fig1", ("cluster_count",), "points per cluster"),),
    "range": (
        ("fig4", ("k",), "bandwidth range width"),
        ("fig5", ("acp", "alp"), "bandwidth range width"),
    ),
    "imbalance": (("fig2", ("k",), "cardinality ratio"),),
    "count": (("fig3", ("k",), "component count"),),
}


def plotdata_tables(result: SweepResult):
    """Long-format per-figure tables: (figure name, header, rows)."""
    tables = []
    for fig, metrics, _ in PLOTDATA_FIGURES[result.kind]:
        header = ("sweep_var", "algo", "metric", "mean", "ci_lo", "ci_hi")
        rows = [
            (r.sweep_var, r.algo, r.metric, r.mean, r.ci_lo, r.ci_hi)
            for r in sorted(
                result.rows, key=lambda r: (r.sweep_var, r.algo, r.metric)
            )
            if r.metric in metrics
        ]
        tables.append((fig, header, rows))
    return tables
