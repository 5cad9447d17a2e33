"""Executable checks of the theoretical guarantees, run on real traces.

Each check returns a named pass/fail record with the observed worst margin,
so a failure points at the exact step and quantity that broke.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_state, objective, partial_gradient
from .engine import ASCENT_TOL, RunConfig, run_dsms
from .experiments import TABLE_BANDWIDTH, TABLE_RANGE, derive_seed, table_config
from .kernels import Profile
from .schedule import DEFAULT_EDGE_GUARD, BandwidthSchedule
from .synthdata import generate, paper_spec

_DATA_TAG = 0x7E57
_RUN_TAG = 0x7E58


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _dsms_traces(seeds, n_per_cluster, spread_is, edge_guard, nu_spec, step_cap):
    traces = []
    for seed in seeds:
        points, _ = generate(
            paper_spec(n_per_cluster, spread_is=spread_is),
            derive_seed(seed, _DATA_TAG),
        )
        cfg = table_config(
            "dsms",
            derive_seed(seed, _RUN_TAG),
            trace_level="full",
            max_iterations=step_cap,
            edge_guard=edge_guard,
            nu_spec=nu_spec,
        )
        traces.append((run_dsms(points, cfg), cfg))
    return traces


def check_ascent(traces) -> CheckResult:
    """Objective climb floor on every recorded step of every run."""
    worst = np.inf
    where = ""
    for trace, cfg in traces:
        alpha = cfg.profile.alpha
        floor = 2.0 * alpha / trace.bandwidth**2 * trace.shift_norm**2
        margins = trace.objective_delta - floor
        i = int(np.argmin(margins))
        if margins[i] < worst:
            worst = float(margins[i])
            where = f"seed {trace.seed} step {i}"
    return CheckResult(
        "ascent_inequality",
        worst >= -ASCENT_TOL,
        f"worst margin {worst:.3e} at {where}",
    )


def check_gradient_bound(traces) -> CheckResult:
    """Partial-gradient norm cap on every recorded step of every run."""
    worst = np.inf
    where = ""
    for trace, cfg in traces:
        alpha = cfg.profile.alpha
        n = trace.final_state.shape[0]
        cap = 2.0 * n * alpha / trace.bandwidth**2 * trace.shift_norm
        margins = cap - trace.gradient_norm
        i = int(np.argmin(margins))
        if margins[i] < worst:
            worst = float(margins[i])
            where = f"seed {trace.seed} step {i}"
    return CheckResult(
        "gradient_bound",
        worst >= -ASCENT_TOL,
        f"worst margin {worst:.3e} at {where}",
    )


def check_gradient_fd(
    count: int = 100, seed: int = 20260501, tol: float = 1e-5
) -> CheckResult:
    """Analytic partial gradients against central finite differences."""
    rng = np.random.default_rng(seed)
    p = Profile(2)
    eps = 1e-6
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 11))
        d = int(rng.integers(1, 4))
        state = as_state(rng.uniform(-1.0, 1.0, (n, d)))
        h = float(rng.uniform(0.5, 1.5))
        i = int(rng.integers(0, n))
        grad = partial_gradient(state, i, h, p)
        fd = np.zeros(d)
        for c in range(d):
            hi = state.copy()
            hi[i, c] += eps
            lo = state.copy()
            lo[i, c] -= eps
            fd[c] = (objective(hi, h, p) - objective(lo, h, p)) / (2 * eps)
        scale = max(float(np.linalg.norm(grad)), 1e-8)
        worst = max(worst, float(np.linalg.norm(fd - grad)) / scale)
    return CheckResult(
        "gradient_finite_difference", worst <= tol, f"worst relative error {worst:.3e}"
    )


def check_submartingale_mc(
    states: int = 5,
    draws: int = 10_000,
    seed: int = 20260502,
    edge_guard: float = DEFAULT_EDGE_GUARD,
) -> CheckResult:
    """Mean objective over one-step bandwidth draws from h = 0.6 never drops.

    Monte-Carlo restatement of the submartingale property: for a frozen
    state, the average of the objective at the freshly drawn bandwidth must
    be at least its value at the current bandwidth, up to 3 standard errors.
    """
    rng = np.random.default_rng(seed)
    p = Profile(2)
    worst = np.inf
    for _ in range(states):
        n = int(rng.integers(3, 9))
        state = as_state(rng.uniform(-1.5, 1.5, (n, 2)))
        base = objective(state, TABLE_BANDWIDTH, p)
        sched = BandwidthSchedule(
            TABLE_RANGE[0], TABLE_RANGE[1], TABLE_BANDWIDTH, edge_guard=edge_guard
        )
        values = np.empty(draws)
        for j in range(draws):
            sched.h_current = TABLE_BANDWIDTH
            sched.k = 1
            values[j] = objective(state, sched.draw_bandwidth(rng), p)
        se = values.std(ddof=1) / np.sqrt(draws)
        margin = (values.mean() - base) / se if se > 0 else np.inf
        worst = min(worst, margin)
    return CheckResult(
        "submartingale_monte_carlo",
        worst >= -3.0,
        f"worst margin {worst:+.2f} standard errors",
    )


def check_terminal_separation(traces, frac: float = 0.05) -> CheckResult:
    """Converged states have all pair distances tiny or nearly the range floor."""
    worst_pair = None
    ok = True
    for trace, cfg in traces:
        if trace.stop_reason != "converged":
            return CheckResult(
                "terminal_separation", False, f"seed {trace.seed} did not converge"
            )
        tau = frac * cfg.h_min
        x = trace.final_state
        d = np.sqrt(np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1))
        iu = np.triu_indices(x.shape[0], k=1)
        pd = d[iu]
        bad = (pd >= tau) & (pd <= cfg.h_min - tau)
        if np.any(bad):
            ok = False
            worst_pair = float(pd[bad][0])
    detail = "all pairs separated" if ok else f"pair at distance {worst_pair:.4g}"
    return CheckResult("terminal_separation", ok, detail)


def check_gradient_decay(traces, frac: float = 0.01) -> CheckResult:
    """Partial-gradient norms: max over the last 1% of steps <= first 1%."""
    ok = True
    detail_parts = []
    for trace, _ in traces:
        g = trace.gradient_norm
        w = max(1, int(frac * g.size))
        head = float(g[:w].max())
        tail = float(g[-w:].max())
        if tail > head:
            ok = False
            detail_parts.append(f"seed {trace.seed}: {tail:.3e} > {head:.3e}")
    return CheckResult(
        "gradient_decay",
        ok,
        "; ".join(detail_parts) if detail_parts else "tails below heads on all runs",
    )


def run_theory_suite(
    seeds=tuple(range(10)),
    n_per_cluster: int = 50,
    spread_is: str = "variance",
    edge_guard: float = DEFAULT_EDGE_GUARD,
    nu_spec: str = "paper-log",
    step_cap: int = 200_000,
) -> list:
    """Run every check; returns the list of CheckResults."""
    traces = _dsms_traces(
        seeds, n_per_cluster, spread_is, edge_guard, nu_spec, step_cap
    )
    return [
        check_ascent(traces),
        check_gradient_bound(traces),
        check_gradient_fd(),
        check_submartingale_mc(edge_guard=edge_guard),
        check_terminal_separation(traces),
        check_gradient_decay(traces),
    ]


def format_results(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{'PASS' if r.passed else 'FAIL'}  {r.name.ljust(width)}  {r.detail}"
        for r in results
    ]
    status = "all checks passed" if all(r.passed for r in results) else "FAILURES present"
    return "\n".join(lines + [status])
