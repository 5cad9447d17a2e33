"""Truncated polynomial profiles and the kernels and weight functions they induce.

A profile maps t in [0, 1] to (1 - t)**alpha and is exactly zero for t >= 1
(hard truncation, no epsilon tail).  The induced radial kernel evaluates the
profile at the squared norm of its argument, and the weight function is the
negated profile derivative at the squared norm.  Supported exponents are the
integer alphas 2, 3 and 4, giving the bi-, tri- and quadweight kernels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KERNEL_ALPHAS = {"biweight": 2, "triweight": 3, "quadweight": 4}


@dataclass(frozen=True)
class Profile:
    """Polynomial profile t -> (1 - t)**alpha with hard truncation at t = 1."""

    alpha: int = 2

    def __post_init__(self):
        if not isinstance(self.alpha, (int, np.integer)) or self.alpha < 2:
            raise ValueError(f"alpha must be an integer >= 2, got {self.alpha!r}")

    @classmethod
    def from_name(cls, name: str) -> "Profile":
        """Build a profile from a kernel name: biweight, triweight or quadweight."""
        try:
            return cls(KERNEL_ALPHAS[name])
        except KeyError:
            raise ValueError(
                f"unknown kernel {name!r}; expected one of {sorted(KERNEL_ALPHAS)}"
            ) from None

    @property
    def name(self) -> str:
        for key, a in KERNEL_ALPHAS.items():
            if a == self.alpha:
                return key
        return f"poly{self.alpha}"


def _check_nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("profile argument must be non-negative")
    return t


def profile_eval(p: Profile, t):
    """(1 - t)**alpha for t < 1, exactly 0 for t >= 1.  Rejects negative t."""
    t = _check_nonneg(t)
    out = np.where(t < 1.0, (1.0 - np.minimum(t, 1.0)) ** p.alpha, 0.0)
    return float(out) if out.ndim == 0 else out


def profile_deriv(p: Profile, t):
    """-alpha * (1 - t)**(alpha - 1) for t < 1, exactly 0 for t >= 1."""
    t = _check_nonneg(t)
    out = np.where(
        t < 1.0, -p.alpha * (1.0 - np.minimum(t, 1.0)) ** (p.alpha - 1), 0.0
    )
    return float(out) if out.ndim == 0 else out


def kernel_eval(p: Profile, u) -> float:
    """Radial kernel value: profile at the squared Euclidean norm of u."""
    u = np.asarray(u, dtype=float)
    return profile_eval(p, float(np.dot(u.ravel(), u.ravel())))


def weight_eval(p: Profile, u) -> float:
    """Weight value: negated profile derivative at the squared norm of u.

    Strictly positive iff the norm of u is below 1, zero outside; this makes
    nonzero weight coincide exactly with strict neighborhood membership.
    """
    u = np.asarray(u, dtype=float)
    return -profile_deriv(p, float(np.dot(u.ravel(), u.ravel())))
