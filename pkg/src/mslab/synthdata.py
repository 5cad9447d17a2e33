"""Seeded synthetic Gaussian-mixture datasets for the benchmark suite.

All draws go through numpy's Generator seeded with a SeedSequence, using the
PCG64 bit generator and the standard ziggurat normal transform, so a given
(spec, seed) pair reproduces the same sample on any platform running the same
numpy generator family.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BENCHMARK_MEANS = ((1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))
BENCHMARK_SPREAD = 0.65


@dataclass(frozen=True)
class GmmComponent:
    mean: tuple
    variance: float
    count: int

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class GmmSpec:
    """Isotropic Gaussian mixture: per-component mean, variance and count."""

    components: tuple

    def __post_init__(self):
        if not self.components:
            raise ValueError("need at least one component")
        dims = {len(c.mean) for c in self.components}
        if len(dims) != 1:
            raise ValueError("all component means must share a dimension")

    @property
    def dim(self) -> int:
        return len(self.components[0].mean)

    @property
    def total(self) -> int:
        return sum(c.count for c in self.components)


def generate(spec: GmmSpec, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw the mixture sample; returns (points, component labels)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    blocks, labels = [], []
    for ci, comp in enumerate(spec.components):
        mu = np.asarray(comp.mean, dtype=float)
        blocks.append(
            mu + np.sqrt(comp.variance) * rng.standard_normal((comp.count, spec.dim))
        )
        labels.append(np.full(comp.count, ci, dtype=np.int64))
    return np.ascontiguousarray(np.vstack(blocks)), np.concatenate(labels)


def _variance_from(spread: float, spread_is: str) -> float:
    if spread_is == "variance":
        return spread
    if spread_is == "stddev":
        return spread * spread
    raise ValueError(f"spread_is must be 'variance' or 'stddev', got {spread_is!r}")


def paper_spec(
    n_per_cluster: int,
    spread: float = BENCHMARK_SPREAD,
    spread_is: str = "variance",
) -> GmmSpec:
    """Three-component benchmark: means (1,1), (-1,-1), (1,-1), equal counts.

    The 0.65 scale is interpreted as the variance of the isotropic covariance
    by default; pass spread_is="stddev" for the alternative reading.
    """
    if n_per_cluster < 1:
        raise ValueError("n_per_cluster must be >= 1")
    var = _variance_from(spread, spread_is)
    return GmmSpec(
        tuple(GmmComponent(m, var, n_per_cluster) for m in BENCHMARK_MEANS)
    )


def imbalance_spec(
    ratio: float,
    total: int = 200,
    spread: float = BENCHMARK_SPREAD,
    spread_is: str = "variance",
) -> GmmSpec:
    """Two benchmark-style components with counts in the given ratio.

    Uses the first two benchmark means; counts are rounded so they sum to
    `total` with count(first) / count(second) as close to `ratio` as rounding
    allows.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    if total < 2:
        raise ValueError("total must be >= 2")
    var = _variance_from(spread, spread_is)
    n1 = min(max(int(round(total * ratio / (1.0 + ratio))), 1), total - 1)
    return GmmSpec(
        (
            GmmComponent(BENCHMARK_MEANS[0], var, n1),
            GmmComponent(BENCHMARK_MEANS[1], var, total - n1),
        )
    )


def ring_spec(
    m: int,
    n_per_cluster: int = 100,
    radius: float = 2.0,
    spread: float = BENCHMARK_SPREAD,
    spread_is: str = "variance",
) -> GmmSpec:
    """m components with means equally spaced on a circle about the origin."""
    if m < 2:
        raise ValueError("need at least two components")
    var = _variance_from(spread, spread_is)
    angles = 2.0 * np.pi * np.arange(m) / m
    return GmmSpec(
        tuple(
            GmmComponent(
                (radius * float(np.cos(a)), radius * float(np.sin(a))),
                var,
                n_per_cluster,
            )
            for a in angles
        )
    )
