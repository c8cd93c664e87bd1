"""Negative binomial and Poisson laws, their truncations to {0, ..., n},
moments and total variation distance.

All mass functions are evaluated in log space and only exponentiated after
shifting by the largest log-mass, so truncations far in the tail keep full
relative precision.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORMALIZATION_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when distribution parameters fall outside their domain."""


class Family(str, enum.Enum):
    NEG_BINOMIAL = "NegBinomial"
    POISSON = "Poisson"


@dataclass(frozen=True)
class DistParams:
    """Parameters of the reference family.

    Negative binomial uses ``P(Z=k) = Gamma(r+k)/(Gamma(r) k!) (1-p)^r p^k``;
    Poisson uses ``lam``.
    """

    family: Family
    r: float | None = None
    p: float | None = None
    lam: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.NEG_BINOMIAL:
            if self.r is None or self.p is None:
                raise ParameterError("negative binomial needs r and p")
            if not (math.isfinite(self.r) and self.r > 0):
                raise ParameterError(f"r must be positive, got {self.r}")
            if not (0 < self.p < 1):
                raise ParameterError(f"p must lie in (0, 1), got {self.p}")
        else:
            if self.lam is None or not (math.isfinite(self.lam) and self.lam > 0):
                raise ParameterError(f"lambda must be positive, got {self.lam}")

    @classmethod
    def negative_binomial(cls, r: float, p: float) -> "DistParams":
        return cls(Family.NEG_BINOMIAL, r=float(r), p=float(p))

    @classmethod
    def poisson(cls, lam: float) -> "DistParams":
        return cls(Family.POISSON, lam=float(lam))

    @property
    def is_poisson(self) -> bool:
        return self.family is Family.POISSON

    @property
    def rate_at_zero(self) -> float:
        """``p*r`` for the negative binomial, ``lam`` for Poisson."""
        return self.lam if self.is_poisson else self.p * self.r

    def birth_rate(self, i):
        """Untruncated upward rate out of state ``i`` (``p(r+i)`` or ``lam``)."""
        if self.is_poisson:
            return self.lam + 0.0 * np.asarray(i, dtype=float)
        return self.p * (self.r + np.asarray(i, dtype=float))

    def matched_poisson(self) -> "DistParams":
        if self.is_poisson:
            return self
        return DistParams.poisson(self.p * self.r)

    def to_dict(self) -> dict:
        if self.is_poisson:
            return {"family": self.family.value, "lambda": self.lam}
        return {"family": self.family.value, "r": self.r, "p": self.p}


@dataclass(frozen=True)
class FinitePmf:
    """Probability mass function on ``{0, ..., n}``; ``probs[k]`` is the mass at ``k``."""

    n: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or len(probs) != self.n + 1:
            raise ValueError(f"expected {self.n + 1} masses, got shape {probs.shape}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("masses must be finite and non-negative")
        total = math.fsum(probs)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point_mass(cls, k: int, n: int) -> "FinitePmf":
        probs = np.zeros(n + 1)
        probs[k] = 1.0
        return cls(n, probs)

    def padded(self, n: int) -> "FinitePmf":
        if n < self.n:
            raise ValueError(f"cannot pad support cap {self.n} down to {n}")
        return FinitePmf(n, np.concatenate([self.probs, np.zeros(n - self.n)]))

    def expect(self, values: Sequence[float]) -> float:
        return math.fsum(self.probs * np.asarray(values, dtype=float))

    def to_dict(self) -> dict:
        return {"n": self.n, "probs": [float(x) for x in self.probs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "FinitePmf":
        return cls(int(data["n"]), np.asarray(data["probs"], dtype=float))

    def to_csv_rows(self) -> list[tuple[int, float]]:
        return [(k, float(x)) for k, x in enumerate(self.probs)]


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float


def _log_pmf_array(params: DistParams, ks: np.ndarray) -> np.ndarray:
    ks = np.asarray(ks, dtype=float)
    lgk1 = np.array([math.lgamma(k + 1.0) for k in ks])
    if params.is_poisson:
        return -params.lam + ks * math.log(params.lam) - lgk1
    r, p = params.r, params.p
    lg_ratio = np.array([math.lgamma(r + k) for k in ks]) - math.lgamma(r)
    return lg_ratio - lgk1 + r * math.log1p(-p) + ks * math.log(p)


def log_pmf(params: DistParams, k: int) -> float:
    """Log mass of the untruncated law at ``k``, via ``math.lgamma``."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return float(_log_pmf_array(params, np.array([k]))[0])


def pmf(params: DistParams, k: int) -> float:
    return math.exp(log_pmf(params, k))


def pmf_vector(params: DistParams, n: int) -> np.ndarray:
    """Untruncated masses at ``0, ..., n``."""
    return np.exp(_log_pmf_array(params, np.arange(n + 1)))


def _check_n(n: int) -> None:
    if n < 0:
        raise ValueError(f"truncation level must be non-negative, got {n}")


def truncate(params: DistParams, n: int) -> FinitePmf:
    """Law of ``Z`` conditioned on ``Z <= n``.

    Normalizes by the summed finite masses rather than ``1 - P(Z > n)``, so a
    truncation carrying almost none of the untruncated mass stays accurate.
    """
    _check_n(n)
    logs = _log_pmf_array(params, np.arange(n + 1))
    weights = np.exp(logs - logs.max())
    probs = weights / math.fsum(weights)
    # one extra pass pins the fsum-normalized total to 1 within an ulp
    probs = probs / math.fsum(probs)
    return FinitePmf(n, probs)


def log_truncated_masses(params: DistParams, n: int) -> np.ndarray:
    """Log masses of the truncated law, immune to underflow."""
    _check_n(n)
    logs = _log_pmf_array(params, np.arange(n + 1))
    shift = logs.max()
    return logs - (shift + math.log(math.fsum(np.exp(logs - shift))))


def _upper_tail_sum(params: DistParams, n: int) -> float:
    # terms decay geometrically past the mode; stop once they no longer move the sum
    terms = []
    k = n + 1
    log_term = log_pmf(params, k)
    mode = params.lam if params.is_poisson else params.p * (params.r - 1) / (1 - params.p)
    while True:
        term = math.exp(log_term)
        terms.append(term)
        if k > mode and term <= 1e-17 * math.fsum(terms):
            break
        if k > mode and term == 0.0:
            break
        ratio = params.lam / (k + 1) if params.is_poisson else params.p * (params.r + k) / (k + 1)
        log_term += math.log(ratio)
        k += 1
    return math.fsum(terms)


def tail_probability(params: DistParams, n: int) -> float:
    """``P(Z > n)``.

    When the lower sum exceeds one half the tail is summed directly term by
    term instead of taken as ``1 - CDF``; this keeps full relative accuracy
    down to the smallest normal double (about 1e-308), below which the result
    underflows to 0.
    """
    _check_n(n)
    lower = math.fsum(pmf_vector(params, n))
    if lower <= 0.5:
        return min(1.0, max(0.0, 1.0 - lower))
    return min(1.0, _upper_tail_sum(params, n))


def moments(pmf: FinitePmf) -> MomentSummary:
    ks = np.arange(pmf.n + 1, dtype=float)
    mean = pmf.expect(ks)
    var = pmf.expect((ks - mean) ** 2)
    return MomentSummary(mean, max(var, 0.0))


def tv_distance(P: FinitePmf, Q: FinitePmf) -> float:
    """Half the l1 distance between two laws on the same ``{0, ..., n}``."""
    if P.n != Q.n:
        raise ValueError(f"support caps differ ({P.n} vs {Q.n}); pad the shorter law first")
    return 0.5 * math.fsum(np.abs(P.probs - Q.probs))


def tv_distance_vs_untruncated(P: FinitePmf, params: DistParams) -> float:
    """TV distance from ``P`` (no mass above ``P.n``) to the untruncated law."""
    diffs = np.abs(P.probs - pmf_vector(params, P.n))
    return 0.5 * (math.fsum(diffs) + tail_probability(params, P.n))
