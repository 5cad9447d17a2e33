"""Random bandwidth schedule for the doubly stochastic runs.

The k-th draw shrinks or grows the current bandwidth multiplicatively:
h_next = h / sqrt(a) with a uniform on (1 - delta, 1 + delta), where

    delta = min(nu_k, (h / h_min)**2 - 1, 1 - (h / h_max)**2)

so that h_next always stays inside [h_min, h_max] and the mean of a is
exactly 1.  The two range terms vanish at the endpoints, which makes the
walk's distance to an endpoint a nonnegative martingale with negative
log-drift: left alone it grinds into h_min or h_max within a few hundred
steps and the exactly-zero delta then freezes it there for good.  To keep
the walk exploring the whole range, draws landing within a small
multiplicative margin of an endpoint are reflected off that margin
(`edge_guard`, default 2%).  Set edge_guard=0 for the unguarded walk.
The guard is skipped automatically for degenerate ranges, where delta = 0
and the bandwidth correctly never moves.
"""
from __future__ import annotations

import math
import re
import warnings

import numpy as np
from numba import njit

NU_PAPER_LOG = 0
NU_CONSTANT = 1
NU_POWER = 2

DEFAULT_EDGE_GUARD = 0.02

_SPEC_RE = re.compile(r"^(constant|power)\(([^)]+)\)$")


def parse_nu_spec(spec: str):
    """Parse a named step-size sequence into a (kind, parameter) pair.

    Accepted forms: "paper-log", "constant(c)" with c > 0, "power(p)" with
    p > 0 (giving k**-p).  A constant sequence does not vanish and is only
    meant for diagnostics; parsing one emits a warning.
    """
    if spec == "paper-log":
        return NU_PAPER_LOG, 0.0
    m = _SPEC_RE.match(spec)
    if not m:
        raise ValueError(f"unknown nu spec {spec!r}")
    kind = NU_CONSTANT if m.group(1) == "constant" else NU_POWER
    param = float(m.group(2))
    if param <= 0:
        raise ValueError(f"nu spec parameter must be positive, got {param}")
    if kind == NU_CONSTANT:
        warnings.warn(
            "constant nu sequence does not vanish; diagnostics only",
            stacklevel=2,
        )
    return kind, param


def nu_value(spec, k: int) -> float:
    """Step-size bound at 1-based step k for a spec name or parsed pair."""
    if k < 1:
        raise ValueError(f"step index must be >= 1, got {k}")
    kind, param = parse_nu_spec(spec) if isinstance(spec, str) else spec
    if kind == NU_PAPER_LOG:
        return 1.0 / math.log10(10.0 + math.log10(k))
    if kind == NU_CONSTANT:
        return param
    return float(k) ** (-param)


def delta_value(h: float, k: int, h_min: float, h_max: float, spec) -> float:
    """Half-width of the uniform multiplier interval at bandwidth h, step k."""
    if not (0 < h_min <= h_max):
        raise ValueError("need 0 < h_min <= h_max")
    if not (h_min <= h <= h_max):
        raise ValueError(f"bandwidth {h} outside [{h_min}, {h_max}]")
    nu = nu_value(spec, k)
    return min(nu, (h / h_min) ** 2 - 1.0, 1.0 - (h / h_max) ** 2)


@njit(cache=True)
def schedule_step(h, k, u, h_min, h_max, nu_kind, nu_param, guard_lo, guard_hi):
    """One bandwidth draw given a uniform variate u in [0, 1).

    Returns the next bandwidth.  guard_lo/guard_hi delimit the reflection
    margins; pass guard_hi <= guard_lo to disable the guard.
    """
    if nu_kind == NU_PAPER_LOG:
        nu = 1.0 / np.log10(10.0 + np.log10(k))
    elif nu_kind == NU_CONSTANT:
        nu = nu_param
    else:
        nu = float(k) ** (-nu_param)
    delta = min(nu, min((h / h_min) ** 2 - 1.0, 1.0 - (h / h_max) ** 2))
    if delta <= 0.0:
        return h
    a = 1.0 - delta + 2.0 * delta * u
    h_next = h / np.sqrt(a)
    if guard_hi > guard_lo:
        if h_next > guard_hi:
            h_next = guard_hi * guard_hi / h_next
        elif h_next < guard_lo:
            h_next = guard_lo * guard_lo / h_next
    return h_next


def guard_bounds(h_min: float, h_max: float, edge_guard: float):
    """Reflection margins for the edge guard; disabled for narrow ranges."""
    if edge_guard <= 0:
        return 1.0, 0.0
    lo = h_min * (1.0 + edge_guard)
    hi = h_max / (1.0 + edge_guard)
    if hi <= lo:
        return 1.0, 0.0
    return lo, hi


class BandwidthSchedule:
    """Stateful bandwidth walk: current bandwidth, step counter, draw rule."""

    def __init__(
        self,
        h_min: float,
        h_max: float,
        h_init: float,
        nu_spec: str = "paper-log",
        edge_guard: float = DEFAULT_EDGE_GUARD,
    ):
        if not (0 < h_min <= h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if not (h_min <= h_init <= h_max):
            raise ValueError(f"h_init {h_init} outside [{h_min}, {h_max}]")
        self.h_min = float(h_min)
        self.h_max = float(h_max)
        self.h_current = float(h_init)
        self.k = 1
        self.nu_spec = nu_spec
        self.nu_kind, self.nu_param = parse_nu_spec(nu_spec)
        self.edge_guard = float(edge_guard)
        self.guard_lo, self.guard_hi = guard_bounds(h_min, h_max, edge_guard)

    def nu(self, k: int | None = None) -> float:
        return nu_value((self.nu_kind, self.nu_param), self.k if k is None else k)

    def delta(self, k: int | None = None) -> float:
        return delta_value(
            self.h_current,
            self.k if k is None else k,
            self.h_min,
            self.h_max,
            (self.nu_kind, self.nu_param),
        )

    def draw_bandwidth(self, rng: np.random.Generator) -> float:
        """Draw the next bandwidth, update the walk state, and return it."""
        h_next = schedule_step(
            self.h_current,
            self.k,
            rng.random(),
            self.h_min,
            self.h_max,
            self.nu_kind,
            self.nu_param,
            self.guard_lo,
            self.guard_hi,
        )
        self.h_current = float(h_next)
        self.k += 1
        return self.h_current
