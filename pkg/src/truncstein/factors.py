"""Stein factor ``G2^[n] = sup_A sup_i |g_A(i+1) - g_A(i)|`` for indicator
test functions, its closed-form bound ``(1 - pi_0) / (p r)`` and the
checks around it (brute force, monotonicity in n, Poisson limit).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DistParams, tail_probability, truncate

BRUTE_FORCE_MAX_N = 20
_CHUNK = 1 << 15


@dataclass(frozen=True)
class FactorReport:
    exact: float
    bound: float
    attain_index: int
    per_state: np.ndarray

    def to_dict(self) -> dict:
        return {
            "exact": float(self.exact),
            "bound": float(self.bound),
            "attain_index": int(self.attain_index),
            "per_state": [float(x) for x in self.per_state],
        }


def delta_sup_per_state(params: DistParams, n: int) -> np.ndarray:
    """Largest ``|g_A(i+1) - g_A(i)|`` over all ``A``, for each state ``i``.

    ``s[i] = (pi_{i+1} + ... + pi_n) / a_i + (pi_0 + ... + pi_{i-1}) / i``,
    the second term taken as 0 at ``i = 0`` and the first as 0 at ``i = n``.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    pi = truncate(params, n).probs
    rates = np.asarray(params.birth_rate(np.arange(n + 1)), dtype=float)
    s = np.empty(n + 1)
    for i in range(n + 1):
        above = math.fsum(pi[i + 1:]) / rates[i]
        below = math.fsum(pi[:i]) / i if i > 0 else 0.0
        s[i] = above + below
    return s


def _mass_ratios(params: DistParams, n: int) -> np.ndarray:
    """``pi_k / pi_0`` for ``k = 0..n``; identical entries for every ``n``."""
    rates = np.asarray(params.birth_rate(np.arange(n)), dtype=float)
    logs = np.concatenate([[0.0], np.cumsum(np.log(rates) - np.log(np.arange(1, n + 1)))])
    return np.exp(logs)


def factor_bound(params: DistParams, n: int) -> float:
    """``(1 - pi_0) / (p r)`` (``/ lam`` for Poisson) with ``pi_0`` truncated.

    ``1 - pi_0`` is formed as ``1 / (1 + 1/T)`` with ``T = sum_{k>=1} pi_k / pi_0``.
    ``T`` is a correctly rounded sum that only gains terms as ``n`` grows, and
    every later step is a rounded monotone map of positive numbers, so the
    computed bound is non-decreasing in ``n`` exactly, with no cancellation.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    T = math.fsum(_mass_ratios(params, n)[1:])
    if T == 0.0:
        return 0.0
    return 1.0 / (1.0 + 1.0 / T) / params.rate_at_zero


def exact_G2(params: DistParams, n: int) -> FactorReport:
    s = delta_sup_per_state(params, n)
    exact = float(s.max())
    # ties within rounding resolve to the lowest state
    attain = int(np.flatnonzero(s >= exact * (1 - 1e-12))[0])
    return FactorReport(exact, factor_bound(params, n), attain, s)


def _solve_many(F: np.ndarray, pi: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Stein solutions for a batch of test functions (rows of ``F``)."""
    n = F.shape[1] - 1
    centred = F - (F @ pi)[:, None]
    g = np.zeros((F.shape[0], n + 2))
    m = int(np.argmax(pi))
    for i in range(m):
        g[:, i + 1] = (centred[:, i] + i * g[:, i]) / rates[i]
    for i in range(n, m, -1):
        upward = rates[i] * g[:, i + 1] if i < n else 0.0
        g[:, i] = (upward - centred[:, i]) / i
    return g


def brute_force_G2(params: DistParams, n: int) -> float:
    """Maximum first difference over every subset of ``{0, ..., n}``.

    Each of the ``2^(n+1)`` indicators gets its own Stein solve; refuses
    ``n > 20``.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force enumerates 2^(n+1) subsets; n={n} exceeds {BRUTE_FORCE_MAX_N}")
    if n == 0:
        return 0.0
    pi = truncate(params, n).probs
    rates = np.asarray(params.birth_rate(np.arange(n + 1)), dtype=float)
    bits = np.arange(n + 1)
    total = 1 << (n + 1)
    best = 0.0
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK))
        F = ((codes[:, None] >> bits) & 1).astype(float)
        g = _solve_many(F, pi, rates)
        best = max(best, float(np.abs(np.diff(g, axis=1)).max()))
    return best


def classical_limit(params: DistParams) -> float:
    """Untruncated factor: ``(1 - (1-p)^r) / (p r)`` or ``(1 - e^-lam) / lam``."""
    if params.is_poisson:
        return -math.expm1(-params.lam) / params.lam
    return -math.expm1(params.r * math.log1p(-params.p)) / (params.p * params.r)


def monotonicity_sweep(params: DistParams, n_max: int) -> np.ndarray:
    """``factor_bound(params, n)`` for ``n = 0, ..., n_max``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return np.array([factor_bound(params, n) for n in range(n_max + 1)])


def convergence_level(params: DistParams, tail_tol: float = 1e-12, n_cap: int = 100_000) -> int:
    """Smallest ``n`` with ``P(Z > n) < tail_tol``."""
    n = 0
    while tail_probability(params, n) >= tail_tol:
        n += 1
        if n > n_cap:
            raise RuntimeError("tail did not fall below tolerance")
    return n


def poisson_limit_check(lam: float, n: int, p_seq, use_exact: bool = False) -> np.ndarray:
    """Gap between the negative binomial factor at ``r = lam/p`` and the
    Poisson factor, for each ``p``."""
    target_params = DistParams.poisson(lam)
    pick = (lambda prm: exact_G2(prm, n).exact) if use_exact else (lambda prm: factor_bound(prm, n))
    target = pick(target_params)
    return np.array([abs(pick(DistParams.negative_binomial(lam / p, p)) - target) for p in p_seq])
