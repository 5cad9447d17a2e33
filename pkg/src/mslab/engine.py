"""The four clustering algorithms and their run traces.

Plain mean shift (ms) iterates each point's trajectory against the fixed
original sample.  Blurring mean shift (bms) updates all points synchronously
against the current state.  Stochastic mean shift (sms) updates one uniformly
drawn point per step, in place, at a fixed bandwidth.  The doubly stochastic
variant (dsms) additionally draws a fresh bandwidth from the schedule before
every update.

Randomness is consumed from two independently seeded sub-streams derived from
the run seed (index stream and bandwidth stream), so sms and dsms runs with
the same seed draw identical index sequences, and every run is reproducible
bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import ShiftOutcome, as_state, bounding_box, mean_shift_op
from .kernels import Profile
from .schedule import (
    DEFAULT_EDGE_GUARD,
    guard_bounds,
    parse_nu_spec,
    schedule_step,
)

ALGORITHMS = ("ms", "bms", "sms", "dsms")
TRACE_LEVELS = ("off", "shifts", "full")

_CHUNK = 1 << 16
_BBOX_TOL = 1e-9

ASCENT_TOL = 1e-9


class EngineInvariantError(AssertionError):
    """A per-step theoretical invariant failed during a traced run."""


@dataclass
class RunConfig:
    algorithm: str
    profile: Profile = Profile(2)
    bandwidth: float = 0.6
    h_min: float = 0.2
    h_max: float = 1.6
    h_init: float = 0.6
    nu_spec: str = "paper-log"
    edge_guard: float = DEFAULT_EDGE_GUARD
    max_iterations: int = 10_000_000
    convergence_threshold: float = 1e-6
    seed: int = 0
    trace_level: str = "off"
    convergence_fraction: float = 1.0

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.trace_level not in TRACE_LEVELS:
            raise ValueError(f"trace_level must be one of {TRACE_LEVELS}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_threshold <= 0:
            raise ValueError("convergence_threshold must be positive")
        if not 0 < self.convergence_fraction <= 1:
            raise ValueError("convergence_fraction must be in (0, 1]")
        if self.algorithm == "dsms":
            if not 0 < self.h_min <= self.h_max:
                raise ValueError("need 0 < h_min <= h_max")
            if not self.h_min <= self.h_init <= self.h_max:
                raise ValueError("h_init must lie in [h_min, h_max]")
            parse_nu_spec(self.nu_spec)
        elif self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        return self


@dataclass
class RunTrace:
    """Final state plus optional per-step records of a single run."""

    algorithm: str
    final_state: np.ndarray
    iterations_used: int
    stop_reason: str                       # converged | max_iter
    seed: int
    trace_level: str
    chosen_index: np.ndarray | None = None  # -1 for sweep algorithms
    bandwidth: np.ndarray | None = None
    shift_norm: np.ndarray | None = None
    objective: np.ndarray | None = None       # full trace only
    objective_delta: np.ndarray | None = None
    gradient_norm: np.ndarray | None = None
    isolated: np.ndarray | None = None        # ms only, per point
    isolated_steps: int = 0

    def to_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "stop_reason": self.stop_reason,
            "iterations_used": int(self.iterations_used),
            "seed": int(self.seed),
            "trace_level": self.trace_level,
            "final_state": self.final_state.tolist(),
        }
        for name in (
            "chosen_index",
            "bandwidth",
            "shift_norm",
            "objective",
            "objective_delta",
            "gradient_norm",
            "isolated",
        ):
            value = getattr(self, name)
            if value is not None:
                out[name] = value.tolist()
        return out


def _spawn_streams(seed):
    ss = np.random.SeedSequence(seed)
    child_idx, child_bw = ss.spawn(2)
    return (
        np.random.Generator(np.random.PCG64(child_idx)),
        np.random.Generator(np.random.PCG64(child_bw)),
    )


def convergence_check(last_shifts, threshold: float, fraction: float = 1.0) -> bool:
    """Stop rule for single-point-update runs, applied every n draws.

    `last_shifts` holds each point's most recent shift magnitude, infinity
    for points never drawn.  Converged when at least ceil(fraction * n)
    points have a last shift strictly below the threshold; fraction 1.0
    therefore also requires that every point has been drawn at least once.
    """
    last = np.asarray(last_shifts, dtype=float)
    n = last.size
    need = min(n, max(1, math.ceil(fraction * n)))
    return int(np.count_nonzero(last < threshold)) >= need


@njit(cache=True)
def _pairwise_objective(X, h, alpha):
    n, d = X.shape
    h2 = h * h
    total = 0.0
    for i in range(n):
        for j in range(i, n):
            d2 = 0.0
            for c in range(d):
                diff = X[i, c] - X[j, c]
                d2 += diff * diff
            t = d2 / h2
            if t < 1.0:
                total += (1.0 - t) ** alpha
    return total


@njit(cache=True)
def _stochastic_chunk(
    X,
    idx,
    u_bw,
    alpha,
    h_start,
    k_start,
    use_schedule,
    h_min,
    h_max,
    nu_kind,
    nu_param,
    guard_lo,
    guard_hi,
    thresh,
    need_count,
    last_shift,
    window_pos,
    trace_mode,
    t_h,
    t_shift,
    t_obj,
    t_dobj,
    t_gnorm,
    bbox_lo,
    bbox_hi,
    bbox_tol,
):
    n, d = X.shape
    m = idx.shape[0]
    h = h_start
    k = k_start
    wpos = window_pos
    bbox_ok = True
    new_pt = np.empty(d)
    grad = np.empty(d)
    for s in range(m):
        if use_schedule:
            h = schedule_step(
                h, k, u_bw[s], h_min, h_max, nu_kind, nu_param, guard_lo, guard_hi
            )
        k += 1
        i = idx[s]
        h2 = h * h

        obj_pre = 0.0
        if trace_mode == 2:
            obj_pre = _pairwise_objective(X, h, alpha)

        wsum = 0.0
        for c in range(d):
            new_pt[c] = 0.0
            grad[c] = 0.0
        for j in range(n):
            d2 = 0.0
            for c in range(d):
                diff = X[i, c] - X[j, c]
                d2 += diff * diff
            t = d2 / h2
            if t < 1.0:
                w = alpha * (1.0 - t) ** (alpha - 1)
                wsum += w
                for c in range(d):
                    new_pt[c] += w * X[j, c]
                    grad[c] += w * (X[j, c] - X[i, c])
        shift2 = 0.0
        for c in range(d):
            new_pt[c] /= wsum
            diff = new_pt[c] - X[i, c]
            shift2 += diff * diff
        shift = np.sqrt(shift2)

        if trace_mode == 2:
            gnorm2 = 0.0
            for c in range(d):
                g = 2.0 / h2 * grad[c]
                gnorm2 += g * g
            dobj = 0.0
            for j in range(n):
                if j == i:
                    continue
                d2_old = 0.0
                d2_new = 0.0
                for c in range(d):
                    diff_old = X[i, c] - X[j, c]
                    diff_new = new_pt[c] - X[j, c]
                    d2_old += diff_old * diff_old
                    d2_new += diff_new * diff_new
                t_old = d2_old / h2
                t_new = d2_new / h2
                if t_old < 1.0:
                    dobj -= (1.0 - t_old) ** alpha
                if t_new < 1.0:
                    dobj += (1.0 - t_new) ** alpha
            t_obj[s] = obj_pre + dobj
            t_dobj[s] = dobj
            t_gnorm[s] = np.sqrt(gnorm2)
            for c in range(d):
                if (
                    new_pt[c] < bbox_lo[c] - bbox_tol
                    or new_pt[c] > bbox_hi[c] + bbox_tol
                ):
                    bbox_ok = False
        if trace_mode >= 1:
            t_h[s] = h
            t_shift[s] = shift

        for c in range(d):
            X[i, c] = new_pt[c]
        last_shift[i] = shift
        wpos += 1
        if wpos >= n:
            wpos = 0
            count = 0
            for j in range(n):
                if last_shift[j] < thresh:
                    count += 1
            if count >= need_count:
                return s + 1, True, h, k, wpos, bbox_ok
    return m, False, h, k, wpos, bbox_ok


def _run_stochastic(data: np.ndarray, cfg: RunConfig) -> RunTrace:
    X = as_state(data).copy()
    n = X.shape[0]
    use_schedule = cfg.algorithm == "dsms"
    if use_schedule:
        h0 = cfg.h_init
        h_min, h_max = cfg.h_min, cfg.h_max
        nu_kind, nu_param = parse_nu_spec(cfg.nu_spec)
        guard_lo, guard_hi = guard_bounds(h_min, h_max, cfg.edge_guard)
    else:
        h0 = cfg.bandwidth
        h_min = h_max = h0
        nu_kind, nu_param = 0, 0.0
        guard_lo, guard_hi = 1.0, 0.0

    rng_idx, rng_bw = _spawn_streams(cfg.seed)
    thresh = cfg.convergence_threshold
    need_count = min(n, max(1, math.ceil(cfg.convergence_fraction * n)))
    last_shift = np.full(n, np.inf)
    trace_mode = TRACE_LEVELS.index(cfg.trace_level)
    bbox_lo, bbox_hi = bounding_box(X)
    span = float(np.max(bbox_hi - bbox_lo)) if n > 1 else 0.0
    bbox_tol = _BBOX_TOL * (1.0 + span)

    chunks: list[dict] = []
    steps = 0
    k = 1
    h = h0
    window_pos = 0
    converged = False
    while steps < cfg.max_iterations and not converged:
        m = int(min(_CHUNK, cfg.max_iterations - steps))
        idx = rng_idx.integers(0, n, size=m, dtype=np.int64)
        u_bw = rng_bw.random(size=m) if use_schedule else np.zeros(m)
        t_h = np.empty(m) if trace_mode >= 1 else np.empty(1)
        t_shift = np.empty(m) if trace_mode >= 1 else np.empty(1)
        t_obj = np.empty(m) if trace_mode == 2 else np.empty(1)
        t_dobj = np.empty(m) if trace_mode == 2 else np.empty(1)
        t_gnorm = np.empty(m) if trace_mode == 2 else np.empty(1)
        used, converged, h, k, window_pos, bbox_ok = _stochastic_chunk(
            X,
            idx,
            u_bw,
            cfg.profile.alpha,
            h,
            k,
            use_schedule,
            h_min,
            h_max,
            nu_kind,
            nu_param,
            guard_lo,
            guard_hi,
            thresh,
            need_count,
            last_shift,
            window_pos,
            trace_mode,
            t_h,
            t_shift,
            t_obj,
            t_dobj,
            t_gnorm,
            bbox_lo,
            bbox_hi,
            bbox_tol,
        )
        if trace_mode == 2 and not bbox_ok:
            raise EngineInvariantError(
                "updated point escaped the initial bounding box"
            )
        if trace_mode >= 1:
            rec = {
                "index": idx[:used].copy(),
                "h": t_h[:used].copy(),
                "shift": t_shift[:used].copy(),
            }
            if trace_mode == 2:
                rec["obj"] = t_obj[:used].copy()
                rec["dobj"] = t_dobj[:used].copy()
                rec["gnorm"] = t_gnorm[:used].copy()
            chunks.append(rec)
        steps += used

    trace = RunTrace(
        algorithm=cfg.algorithm,
        final_state=X,
        iterations_used=steps,
        stop_reason="converged" if converged else "max_iter",
        seed=cfg.seed,
        trace_level=cfg.trace_level,
    )
    if trace_mode >= 1 and chunks:
        trace.chosen_index = np.concatenate([c["index"] for c in chunks])
        trace.bandwidth = np.concatenate([c["h"] for c in chunks])
        trace.shift_norm = np.concatenate([c["shift"] for c in chunks])
        if trace_mode == 2:
            trace.objective = np.concatenate([c["obj"] for c in chunks])
            trace.objective_delta = np.concatenate([c["dobj"] for c in chunks])
            trace.gradient_norm = np.concatenate([c["gnorm"] for c in chunks])
            _check_step_invariants(trace, cfg)
    return trace


def _check_step_invariants(trace: RunTrace, cfg: RunConfig):
    """Per-step climb and gradient-bound guarantees for single-point updates."""
    alpha = cfg.profile.alpha
    n = trace.final_state.shape[0]
    h = trace.bandwidth
    shift = trace.shift_norm
    climb_floor = 2.0 * alpha / (h * h) * shift * shift
    bad = np.nonzero(trace.objective_delta < climb_floor - ASCENT_TOL)[0]
    if bad.size:
        s = int(bad[0])
        raise EngineInvariantError(
            f"objective climb violated at step {s}: "
            f"delta={trace.objective_delta[s]!r} < floor={climb_floor[s]!r}"
        )
    grad_cap = 2.0 * n * alpha / (h * h) * shift
    bad = np.nonzero(trace.gradient_norm > grad_cap + ASCENT_TOL)[0]
    if bad.size:
        s = int(bad[0])
        raise EngineInvariantError(
            f"gradient bound violated at step {s}: "
            f"norm={trace.gradient_norm[s]!r} > cap={grad_cap[s]!r}"
        )


def _weight_matrix(Y: np.ndarray, X: np.ndarray, h: float, alpha: int) -> np.ndarray:
    t = np.sum((Y[:, None, :] - X[None, :, :]) ** 2, axis=-1) / (h * h)
    return np.where(t < 1.0, alpha * (1.0 - np.minimum(t, 1.0)) ** (alpha - 1), 0.0)


def run_ms(data, cfg: RunConfig) -> RunTrace:
    """Independent trajectories iterated against the fixed original sample."""
    cfg.validate()
    X0 = as_state(data)
    n = X0.shape[0]
    h = cfg.bandwidth
    alpha = cfg.profile.alpha
    cap = max(1, cfg.max_iterations // n)
    Y = X0.copy()
    active = np.ones(n, dtype=bool)
    isolated = np.zeros(n, dtype=bool)
    trace_mode = TRACE_LEVELS.index(cfg.trace_level)
    sweep_shift: list[float] = []
    sweep_obj: list[float] = []
    updates = 0
    sweep = 0
    while active.any() and sweep < cap:
        sweep += 1
        rows = np.nonzero(active)[0]
        W = _weight_matrix(Y[rows], X0, h, alpha)
        wsum = W.sum(axis=1)
        iso = wsum == 0.0
        new = Y[rows].copy()
        if np.any(~iso):
            new[~iso] = (W[~iso] @ X0) / wsum[~iso, None]
        shifts = np.linalg.norm(new - Y[rows], axis=1)
        Y[rows] = new
        updates += rows.size
        isolated[rows[iso]] = True
        done = (shifts < cfg.convergence_threshold) | iso
        active[rows[done]] = False
        if trace_mode >= 1:
            sweep_shift.append(float(shifts.max()) if shifts.size else 0.0)
            if trace_mode == 2:
                sweep_obj.append(_pairwise_objective(Y, h, alpha))
    trace = RunTrace(
        algorithm="ms",
        final_state=Y,
        iterations_used=updates,
        stop_reason="converged" if not active.any() else "max_iter",
        seed=cfg.seed,
        trace_level=cfg.trace_level,
        isolated=isolated,
        isolated_steps=int(isolated.sum()),
    )
    _attach_sweep_trace(trace, sweep_shift, sweep_obj, h, trace_mode)
    return trace


def run_bms(data, cfg: RunConfig) -> RunTrace:
    """Synchronous sweeps: every point replaced from the current state at once."""
    cfg.validate()
    X = as_state(data).copy()
    n = X.shape[0]
    h = cfg.bandwidth
    alpha = cfg.profile.alpha
    cap = max(1, cfg.max_iterations // n)
    trace_mode = TRACE_LEVELS.index(cfg.trace_level)
    sweep_shift: list[float] = []
    sweep_obj: list[float] = []
    converged = False
    sweep = 0
    while sweep < cap and not converged:
        sweep += 1
        W = _weight_matrix(X, X, h, alpha)
        Xn = (W @ X) / W.sum(axis=1)[:, None]
        disp = float(np.linalg.norm(Xn - X, axis=1).max())
        X = Xn
        converged = disp < cfg.convergence_threshold
        if trace_mode >= 1:
            sweep_shift.append(disp)
            if trace_mode == 2:
                sweep_obj.append(_pairwise_objective(X, h, alpha))
    trace = RunTrace(
        algorithm="bms",
        final_state=X,
        iterations_used=sweep,
        stop_reason="converged" if converged else "max_iter",
        seed=cfg.seed,
        trace_level=cfg.trace_level,
    )
    _attach_sweep_trace(trace, sweep_shift, sweep_obj, h, trace_mode)
    return trace


def _attach_sweep_trace(trace, sweep_shift, sweep_obj, h, trace_mode):
    if trace_mode >= 1:
        count = len(sweep_shift)
        trace.chosen_index = np.full(count, -1, dtype=np.int64)
        trace.bandwidth = np.full(count, h)
        trace.shift_norm = np.asarray(sweep_shift)
        if trace_mode == 2:
            trace.objective = np.asarray(sweep_obj)


def run_sms(data, cfg: RunConfig) -> RunTrace:
    """Single-point random updates at a fixed bandwidth, in place."""
    cfg.validate()
    return _run_stochastic(data, cfg)


def run_dsms(data, cfg: RunConfig) -> RunTrace:
    """Single-point random updates with a per-step random bandwidth."""
    cfg.validate()
    return _run_stochastic(data, cfg)


_RUNNERS = {"ms": run_ms, "bms": run_bms, "sms": run_sms, "dsms": run_dsms}


def run(data, cfg: RunConfig) -> RunTrace:
    """Run the configured algorithm on the data and return its trace."""
    cfg.validate()
    return _RUNNERS[cfg.algorithm](data, cfg)


def single_shift(state, i: int, h: float, p: Profile) -> ShiftOutcome:
    """Mean-shift outcome for state point i against its own state."""
    return mean_shift_op(state, np.asarray(state)[i], h, p)
