"""Machine-repair fault counts and their truncated Poisson approximation.

A machine faults on each working day independently with probability ``p``
and is then out of service for ``R`` days. ``W`` counts faults over ``N``
days starting from a working machine and is compared against
``Po^[n](lam)`` with ``n = floor(N/R) + 1`` and ``lam = E W``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .distributions import (
    DistParams,
    FinitePmf,
    moments,
    tail_probability,
    truncate,
    tv_distance,
    tv_distance_vs_untruncated,
)

CSV_HEADER = ("N", "R", "p", "n", "lambda", "var_w", "tv_trunc", "tv_untrunc",
              "bound_trunc", "bound_untrunc")


@dataclass(frozen=True)
class FaultParams:
    """``fault_day_repairs=True``: the fault day is the first of the ``R``
    repair days, so the next fault can come ``R`` days later. ``False``
    puts the repair on the ``R`` days after the fault day instead.
    """

    N: int
    R: int
    p: float
    fault_day_repairs: bool = True

    def __post_init__(self):
        if self.N < 1 or self.R < 1:
            raise ValueError(f"need N >= 1 and R >= 1, got N={self.N}, R={self.R}")
        if not 0 < self.p < 1:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")

    @property
    def n(self) -> int:
        return self.N // self.R + 1

    @property
    def blocked_after_fault(self) -> int:
        return self.R - 1 if self.fault_day_repairs else self.R


@dataclass(frozen=True)
class BoundComparison:
    lam: float
    var_w: float
    n: int
    tv_trunc: float
    tv_untrunc: float
    bound_trunc: float
    bound_untrunc: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def fault_count_law(params: FaultParams) -> FinitePmf:
    """Exact law of ``W`` on ``{0, ..., n}`` by dynamic programming over days.

    The state is (blocked days still ahead, faults so far).
    """
    n, block = params.n, params.blocked_after_fault
    p = params.p
    # prob[s, w]: s blocked days ahead of the current day, w faults so far
    prob = np.zeros((block + 1, n + 1))
    prob[0, 0] = 1.0
    for _ in range(params.N):
        nxt = np.zeros_like(prob)
        nxt[0] += (1 - p) * prob[0]
        nxt[block, 1:] += p * prob[0, :-1]
        nxt[:-1] += prob[1:]
        prob = nxt
    law = prob.sum(axis=0)
    return FinitePmf(n, law / math.fsum(law))


def proposition_bounds(params: FaultParams) -> BoundComparison:
    """Exact TV distances to ``Po^[n](lam)`` and ``Po(lam)`` next to the
    truncated bound ``lam G2^[n] (1 - Var W / lam)`` and the untruncated
    ``(1 - e^-lam)(1 - Var W / lam)``."""
    law = fault_count_law(params)
    summary = moments(law)
    lam, var_w = summary.mean, summary.variance
    n = params.n
    dispersion = 1.0 - var_w / lam
    if dispersion < 0:
        warnings.warn(f"Var W exceeds E W (1 - Var/lam = {dispersion:.3e}); "
                      "the indicators cannot be negatively related", RuntimeWarning, stacklevel=2)
    poisson = DistParams.poisson(lam)
    # lam * G2^[n] = 1 - pi_0 = (q - t) / (1 - t) with q = 1 - e^-lam, t = P(Po(lam) > n);
    # written through the tail so it never rounds above q when t is negligible
    q = -math.expm1(-lam)
    t = tail_probability(poisson, n)
    scaled_factor = (q - t) / (1.0 - t)
    return BoundComparison(
        lam=lam,
        var_w=var_w,
        n=n,
        tv_trunc=tv_distance(law, truncate(poisson, n)),
        tv_untrunc=tv_distance_vs_untruncated(law, poisson),
        bound_trunc=scaled_factor * dispersion,
        bound_untrunc=q * dispersion,
    )


def truncation_matters(cmp: BoundComparison, tol: float = 1e-15) -> bool:
    return tail_probability(DistParams.poisson(cmp.lam), cmp.n) > tol


def csv_row(params: FaultParams, cmp: BoundComparison) -> tuple:
    return (params.N, params.R, params.p, cmp.n, cmp.lam, cmp.var_w, cmp.tv_trunc,
            cmp.tv_untrunc, cmp.bound_trunc, cmp.bound_untrunc)


def order_p_sweep(N: int, R: int, p_seq, fault_day_repairs: bool = True) -> list[dict]:
    """``bound_trunc`` and ``bound_trunc / p`` along a decreasing ``p``
    sequence, with the log-log slope against the previous entry."""
    p_seq = [float(p) for p in p_seq]
    if any(b >= a for a, b in zip(p_seq, p_seq[1:])):
        raise ValueError("p_seq must be strictly decreasing")
    records = []
    for p in p_seq:
        fp = FaultParams(N, R, p, fault_day_repairs)
        cmp = proposition_bounds(fp)
        rec = {"p": p, "bound_trunc": cmp.bound_trunc, "bound_over_p": cmp.bound_trunc / p,
               "dispersion": 1.0 - cmp.var_w / cmp.lam, "comparison": cmp, "slope": None}
        if records:
            prev = records[-1]
            rec["slope"] = (math.log(cmp.bound_trunc) - math.log(prev["bound_trunc"])) / (
                math.log(p) - math.log(prev["p"]))
        records.append(rec)
    return records
