"""Stein's method for negative binomial and Poisson approximation truncated to {0, ..., n}."""

__version__ = "0.1.0"

from .distributions import (
    DistParams,
    Family,
    FinitePmf,
    MomentSummary,
    ParameterError,
    log_pmf,
    moments,
    tail_probability,
    truncate,
    tv_distance,
    tv_distance_vs_untruncated,
)
from .factors import (
    FactorReport,
    brute_force_G2,
    classical_limit,
    delta_sup_per_state,
    exact_G2,
    monotonicity_sweep,
    poisson_limit_check,
)
from .fault import BoundComparison, FaultParams, fault_count_law, order_p_sweep, proposition_bounds
from .stein import (
    SteinSolution,
    TestFunction,
    recover_pmf_from_identity,
    solve_closed_form,
    solve_forward,
    stein_residual,
)
