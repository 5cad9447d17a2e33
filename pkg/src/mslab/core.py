"""State representation and the elementary mean-shift quantities.

A state is an ordered collection of n points in R^d, stored as a C-contiguous
(n, d) float64 array.  All functions here are read-only on their inputs; the
engine module owns every in-place update.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from math import ceil, floor

import numpy as np

from .kernels import Profile


def as_state(points) -> np.ndarray:
    """Validate and normalize a point collection to a (n, d) float64 array."""
    x = np.ascontiguousarray(points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"state must be a non-empty 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state contains non-finite coordinates")
    return x


def bounding_box(state: np.ndarray):
    """Axis-aligned bounding box (lo, hi) of a state."""
    return state.min(axis=0), state.max(axis=0)


@dataclass(frozen=True)
class ShiftOutcome:
    """Result of applying the mean-shift operator to a single point."""

    new_point: np.ndarray
    shift_norm: float
    neighbor_count: int
    weight_sum: float
    isolated: bool = False


def neighborhood(state: np.ndarray, x, h: float) -> np.ndarray:
    """Indices i with ||x - state[i]|| < h, strict inequality."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    x = np.asarray(x, dtype=float)
    d2 = np.sum((state - x) ** 2, axis=1)
    return np.nonzero(d2 < h * h)[0]


def _weights(state: np.ndarray, x, h: float, p: Profile) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = np.sum((state - x) ** 2, axis=1) / (h * h)
    return np.where(t < 1.0, p.alpha * (1.0 - np.minimum(t, 1.0)) ** (p.alpha - 1), 0.0)


def mean_shift_op(state: np.ndarray, x, h: float, p: Profile) -> ShiftOutcome:
    """Weighted average of the points within bandwidth h of x.

    If x is farther than h from every sample point the weight sum is zero and
    x is returned unchanged, flagged as isolated.  This can only happen for
    free trajectories; a point that is itself part of the state always carries
    its own positive weight.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    x = np.asarray(x, dtype=float)
    w = _weights(state, x, h, p)
    wsum = float(w.sum())
    nbrs = int(np.count_nonzero(w))
    if wsum == 0.0:
        return ShiftOutcome(x.copy(), 0.0, 0, 0.0, isolated=True)
    new = (w @ state) / wsum
    return ShiftOutcome(new, float(np.linalg.norm(new - x)), nbrs, wsum)


def objective(state: np.ndarray, h: float, p: Profile) -> float:
    """Sum of pairwise kernel values at bandwidth h, self-pairs included.

    The n diagonal terms each contribute the profile value at 0; they are
    constant under any update, so differences of this objective ignore them.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    d2 = np.sum((state[:, None, :] - state[None, :, :]) ** 2, axis=-1)
    t = d2 / (h * h)
    k = np.where(t < 1.0, (1.0 - np.minimum(t, 1.0)) ** p.alpha, 0.0)
    n = state.shape[0]
    iu = np.triu_indices(n)
    return float(k[iu].sum())


def partial_gradient(state: np.ndarray, i: int, h: float, p: Profile) -> np.ndarray:
    """Gradient of the pairwise objective with respect to point i.

    Equals (2 / h^2) * sum_j w_ij * (x_j - x_i) over the other points, which
    is also (2 / h^2) * weight_sum * (mean-shift target - x_i).
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    if not 0 <= i < state.shape[0]:
        raise IndexError(f"point index {i} out of range")
    w = _weights(state, state[i], h, p)
    w[i] = 0.0
    return (2.0 / (h * h)) * (w @ (state - state[i]))


def gradient_max_norm(state: np.ndarray, h: float, p: Profile) -> float:
    """Maximum over points of the Euclidean norm of the partial gradient."""
    return max(
        float(np.linalg.norm(partial_gradient(state, i, h, p)))
        for i in range(state.shape[0])
    )


def is_critical(state: np.ndarray, h: float, tol: float = 0.0) -> bool:
    """Whether every pair of points either coincides or is at least h apart.

    The relaxation by tol accepts pairs with distance <= tol as coincident and
    pairs with distance >= h - tol as separated.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    d = np.sqrt(np.sum((state[:, None, :] - state[None, :, :]) ** 2, axis=-1))
    iu = np.triu_indices(state.shape[0], k=1)
    pd = d[iu]
    return bool(np.all((pd <= tol) | (pd >= h - tol)))


class GridIndex:
    """Uniform-grid index for fixed-radius neighbor queries.

    Returns exactly the same index sets as the linear scan in `neighborhood`
    for any query radius up to the cell size.
    """

    def __init__(self, points: np.ndarray, cell_size: float):
        if cell_size <= 0:
            raise ValueError("cell size must be positive")
        self.points = as_state(points)
        self.cell = float(cell_size)
        self.origin = self.points.min(axis=0)
        self.cells: dict = defaultdict(list)
        for idx, pt in enumerate(self.points):
            self.cells[self._key(pt)].append(idx)

    def _key(self, pt) -> tuple:
        return tuple(int(floor(c)) for c in (pt - self.origin) / self.cell)

    def query(self, x, radius: float) -> np.ndarray:
        """Indices with ||x - point|| < radius, strict, in ascending order."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        x = np.asarray(x, dtype=float)
        reach = ceil(radius / self.cell)
        center = self._key(x)
        candidates = []
        for offset in np.ndindex(*(2 * reach + 1,) * len(center)):
            key = tuple(c + o - reach for c, o in zip(center, offset))
            candidates.extend(self.cells.get(key, ()))
        if not candidates:
            return np.empty(0, dtype=np.int64)
        cand = np.asarray(sorted(candidates), dtype=np.int64)
        d2 = np.sum((self.points[cand] - x) ** 2, axis=1)
        return cand[d2 < radius * radius]
