"""Mean-shift clustering lab.

Plain, blurring, stochastic and doubly stochastic mean-shift over truncated
polynomial kernels, with cluster-purity metrics, a synthetic benchmark
generator, a sweep harness, and an executable suite of theoretical checks.
"""
from .clusters import Clustering, acp, alp, contingency, extract_clusters, k_score
from .core import (
    GridIndex,
    ShiftOutcome,
    as_state,
    gradient_max_norm,
    is_critical,
    mean_shift_op,
    neighborhood,
    objective,
    partial_gradient,
)
from .engine import RunConfig, RunTrace, run, run_bms, run_dsms, run_ms, run_sms
from .kernels import Profile, kernel_eval, profile_deriv, profile_eval, weight_eval
from .schedule import BandwidthSchedule, delta_value, nu_value
from .synthdata import GmmComponent, GmmSpec, generate, paper_spec

__version__ = "0.1.0"

__all__ = [
    "BandwidthSchedule",
    "Clustering",
    "GmmComponent",
    "GmmSpec",
    "GridIndex",
    "Profile",
    "RunConfig",
    "RunTrace",
    "ShiftOutcome",
    "acp",
    "alp",
    "as_state",
    "contingency",
    "delta_value",
    "extract_clusters",
    "generate",
    "gradient_max_norm",
    "is_critical",
    "k_score",
    "kernel_eval",
    "mean_shift_op",
    "neighborhood",
    "nu_value",
    "objective",
    "paper_spec",
    "partial_gradient",
    "profile_deriv",
    "profile_eval",
    "run",
    "run_bms",
    "run_dsms",
    "run_ms",
    "run_sms",
    "weight_eval",
]
