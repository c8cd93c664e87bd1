"""Solutions of the truncated Stein equation

    a_i g(i+1) 1{i<n} - i g(i) = f(i) - E f(Z^[n]),    i = 0, ..., n,

with birth rates ``a_i = p(r+i)`` (negative binomial) or ``lam`` (Poisson),
plus Stein residuals of arbitrary laws and recovery of the truncated law
from the identity itself.

Solutions are stored on ``0, ..., n+1`` with ``g[0] = g[n+1] = 0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .distributions import DistParams, FinitePmf, log_truncated_masses, truncate

CONSISTENCY_TOL = 1e-10
UNDERFLOW = 1e-300


class ConsistencyError(ArithmeticError):
    """The redundant Stein equation failed to hold for a computed solution."""


@dataclass(frozen=True)
class TestFunction:
    """Indicator of a subset ``A`` of ``{0, ..., n}``."""

    __test__ = False  # not a pytest class

    n: int
    member: np.ndarray

    def __post_init__(self):
        member = np.asarray(self.member, dtype=bool)
        if member.shape != (self.n + 1,):
            raise ValueError(f"indicator needs length {self.n + 1}, got {member.shape}")
        object.__setattr__(self, "member", member)

    @classmethod
    def indicator(cls, n: int, subset: Iterable[int]) -> "TestFunction":
        member = np.zeros(n + 1, dtype=bool)
        for k in subset:
            if not 0 <= k <= n:
                raise ValueError(f"index {k} outside 0..{n}")
            member[k] = True
        return cls(n, member)

    @property
    def values(self) -> np.ndarray:
        return self.member.astype(float)

    @property
    def subset(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.member)]


@dataclass(frozen=True)
class SteinSolution:
    n: int
    g: np.ndarray
    method: str = field(default="recursion", compare=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (self.n + 2,):
            raise ValueError(f"solution needs length {self.n + 2}, got {g.shape}")
        if g[0] != 0.0 or g[-1] != 0.0:
            raise ValueError("solutions are normalized to g[0] = g[n+1] = 0")
        object.__setattr__(self, "g", g)

    @property
    def differences(self) -> np.ndarray:
        """``g[i+1] - g[i]`` for ``i = 0, ..., n``."""
        return np.diff(self.g)

    def to_dict(self) -> dict:
        return {"n": self.n, "g": [float(x) for x in self.g]}


def _rates(params: DistParams, n: int) -> np.ndarray:
    return np.asarray(params.birth_rate(np.arange(n + 1)), dtype=float)


def _check(f: TestFunction, n: int) -> None:
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if f.n != n:
        raise ValueError(f"test function lives on 0..{f.n}, equation on 0..{n}")


def _split_index(pi: np.ndarray) -> int:
    # forward recursion is stable up to the mode, backward recursion above it
    return int(np.argmax(pi))


def equation_residuals(params: DistParams, n: int, f: TestFunction,
                       sol: SteinSolution) -> np.ndarray:
    """Left minus right side of the Stein equation at every ``i = 0..n``."""
    pi = truncate(params, n).probs
    fv = f.values
    centred = fv - math.fsum(pi * fv)
    a = _rates(params, n)
    i = np.arange(n + 1)
    upward = np.where(i < n, a * sol.g[1:], 0.0)
    return upward - i * sol.g[:-1] - centred


def solve_forward(params: DistParams, n: int, f: TestFunction) -> SteinSolution:
    """Solve the Stein equation by direct recursion.

    Runs ``g[i+1] = (f(i) - Ef + i g[i]) / a_i`` upward from ``g[0] = 0`` and
    ``g[i] = (a_i g[i+1] - f(i) + Ef) / i`` downward from ``g[n+1] = 0``,
    meeting at the mode of the truncated law. Of the ``n+1`` equations for
    ``n`` unknowns one goes unused (at the mode); it is checked to 1e-10
    relative to the solution scale and a :class:`ConsistencyError` is raised
    if it fails.
    """
    _check(f, n)
    g = np.zeros(n + 2)
    if n == 0:
        return SteinSolution(0, g)
    pi = truncate(params, n).probs
    fv = f.values
    centred = fv - math.fsum(pi * fv)
    a = _rates(params, n)
    m = _split_index(pi)
    for i in range(m):
        g[i + 1] = (centred[i] + i * g[i]) / a[i]
    for i in range(n, m, -1):
        upward = a[i] * g[i + 1] if i < n else 0.0
        g[i] = (upward - centred[i]) / i
    upward = a[m] * g[m + 1] if m < n else 0.0
    slack = upward - m * g[m] - centred[m]
    scale = max(1.0, float(np.max(np.abs(g))))
    if abs(slack) > CONSISTENCY_TOL * scale:
        raise ConsistencyError(f"unused equation at i={m} off by {slack:.3e}")
    return SteinSolution(n, g)


def solve_closed_form(params: DistParams, n: int, f: TestFunction) -> SteinSolution:
    """Solve via detailed balance ``a_i pi_i = (i+1) pi_{i+1}``:

        g[i+1] = sum_{j<=i} pi_j (f(j) - Ef) / (a_i pi_i).

    Above the mode the equivalent upper sum ``-sum_{j>i}`` is used, which
    avoids cancellation. Masses below 1e-300 trigger a fallback to
    :func:`solve_forward` with a warning; the returned solution's ``method``
    records which route produced it.
    """
    _check(f, n)
    if n == 0:
        return SteinSolution(0, np.zeros(2), method="closed-form")
    log_pi = log_truncated_masses(params, n)
    pi = np.exp(log_pi)
    if np.any(pi < UNDERFLOW):
        warnings.warn("truncated masses underflow; using recursion instead", RuntimeWarning,
                      stacklevel=2)
        sol = solve_forward(params, n, f)
        return SteinSolution(n, sol.g, method="recursion-fallback")
    fv = f.values
    weighted = pi * (fv - math.fsum(pi * fv))
    a = _rates(params, n)
    m = _split_index(pi)
    g = np.zeros(n + 2)
    for i in range(n):
        if i < m:
            partial = math.fsum(weighted[: i + 1])
        else:
            partial = -math.fsum(weighted[i + 1:])
        g[i + 1] = partial / (a[i] * pi[i])
    return SteinSolution(n, g, method="closed-form")


def stein_residual(W: FinitePmf, params: DistParams, n: int, g: SteinSolution) -> float:
    """``E[a_W g(W+1) 1{W<n} - W g(W)]`` under the law ``W``."""
    if W.n != n or g.n != n:
        raise ValueError("law, solution and truncation level must share n")
    i = np.arange(n + 1)
    a = _rates(params, n)
    terms = np.where(i < n, a * g.g[1:], 0.0) - i * g.g[:-1]
    return math.fsum(W.probs * terms)


def recover_pmf_from_identity(params: DistParams, n: int) -> FinitePmf:
    """Rebuild the truncated law from the Stein identity alone.

    Plugging ``g = 1{i}`` into the identity leaves ``a_{i-1} q_{i-1} = i q_i``;
    the recurrence is run in log space and normalized.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    a = _rates(params, n)
    log_q = np.zeros(n + 1)
    for i in range(1, n + 1):
        log_q[i] = log_q[i - 1] + math.log(a[i - 1]) - math.log(i)
    q = np.exp(log_q - log_q.max())
    q = q / math.fsum(q)
    return FinitePmf(n, q / math.fsum(q))
