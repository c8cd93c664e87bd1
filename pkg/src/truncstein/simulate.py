"""Continuous-time simulation of the birth-death chain on ``{0, ..., n}``
whose generator is the truncated Stein operator: birth rate ``p(r+i)``
(``lam`` for Poisson) below ``n`` and 0 at ``n``, death rate ``i``.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence``;
replication ``k`` of a run with seed ``s`` draws from the ``k``-th spawned
child of ``SeedSequence(s)``, so results depend only on the configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .distributions import DistParams, FinitePmf, truncate
from .stein import TestFunction

BURN_IN = 0.1
_BLOCK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    params: DistParams
    n: int
    initial_state: int = 0
    horizon: float | None = None
    event_cap: int | None = None
    seed: int = 0
    replications: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if not 0 <= self.initial_state <= self.n + 1:
            raise ValueError(f"initial state {self.initial_state} outside 0..{self.n}")
        if (self.horizon is None) == (self.event_cap is None):
            raise ValueError("set exactly one of horizon and event_cap")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.event_cap is not None and self.event_cap < 1:
            raise ValueError("event_cap must be positive")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SimEstimate:
    point: float
    std_error: float
    replications: int

    def to_dict(self, seed: int | None = None) -> dict:
        d = {"point": self.point, "std_error": self.std_error, "replications": self.replications}
        if seed is not None:
            d["seed"] = seed
        return d

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.point - target) <= k * self.std_error


def rates(params: DistParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Birth and death rates on ``0, ..., n+1``.

    State ``n+1`` only exists as a starting point; it can only move down.
    """
    states = np.arange(n + 2)
    birth = np.where(states < n, params.birth_rate(states), 0.0)
    death = states.astype(float)
    return birth, death


def _streams(config: SimConfig) -> list[np.random.Generator]:
    children = np.random.SeedSequence(config.seed).spawn(config.replications)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _estimate(samples: np.ndarray) -> SimEstimate:
    k = len(samples)
    sd = float(np.std(samples, ddof=1)) if k > 1 else 0.0
    return SimEstimate(float(np.mean(samples)), sd / math.sqrt(k) if k > 1 else 0.0, k)


def _run(config: SimConfig, rng: np.random.Generator):
    """Yield ``(time, state, holding_time)`` per visited state.

    Under an event cap the state reached by the last event is yielded with
    holding time ``None``.
    """
    birth, death = rates(config.params, config.n)
    total_arr = birth + death
    up = np.divide(birth, total_arr, out=np.zeros_like(total_arr), where=total_arr > 0).tolist()
    total = total_arr.tolist()
    t, state, events = 0.0, config.initial_state, 0
    cap = config.event_cap if config.event_cap is not None else math.inf
    horizon = config.horizon if config.horizon is not None else math.inf
    block = int(min(_BLOCK, cap))
    while True:
        if total[state] == 0.0:
            yield t, state, math.inf
            return
        exps = rng.standard_exponential(block)
        us = rng.random(block)
        for e, u in zip(exps.tolist(), us.tolist()):
            hold = e / total[state]
            yield t, state, hold
            t += hold
            events += 1
            if t >= horizon:
                return
            state = state + 1 if u < up[state] else state - 1
            if events >= cap:
                yield t, state, None
                return


def simulate_path(config: SimConfig, replication: int = 0) -> list[tuple[float, int]]:
    """Jump times and states of one path, starting with ``(0, initial_state)``.

    Ends at the event cap, or at the last jump before the horizon.
    """
    rng = _streams(replace(config, replications=replication + 1))[replication]
    path = []
    for t, state, _ in _run(config, rng):
        if config.horizon is not None and t > config.horizon:
            break
        path.append((t, state))
    return path


def empirical_stationary(config: SimConfig) -> FinitePmf:
    """Time-weighted occupancy over ``[0.1 T, T]``, pooled over replications."""
    if config.horizon is None:
        raise ValueError("stationary estimation needs horizon mode")
    n, T = config.n, config.horizon
    start = BURN_IN * T
    occupancy = np.zeros(n + 1)
    for rng in _streams(config):
        for t, state, hold in _run(config, rng):
            lo, hi = max(t, start), min(t + hold, T)
            if hi > lo:
                occupancy[state] += hi - lo
    return FinitePmf(n, occupancy / math.fsum(occupancy))


def mean_first_transition_from_zero(config: SimConfig) -> SimEstimate:
    """Monte Carlo mean of the first jump time out of state 0 (exactly ``1/(p r)``)."""
    if config.initial_state != 0:
        raise ValueError("first transition time is measured from state 0")
    if config.n == 0:
        raise ValueError("with n = 0 the chain is absorbed at 0 and never jumps")
    single = replace(config, horizon=None, event_cap=1)
    holds = []
    for rng in _streams(config):
        _, _, hold = next(_run(single, rng))
        holds.append(hold)
    return _estimate(np.array(holds))


def sharp_value_estimate(tau: SimEstimate, params: DistParams, n: int) -> SimEstimate:
    """``E tau_01 (1 - pi_0)``, which attains the Stein factor bound."""
    scale = math.fsum(truncate(params, n).probs[1:])
    return SimEstimate(tau.point * scale, tau.std_error * scale, tau.replications)


def _coupled_difference(birth, death, f_ext, hi: int, horizon: float, rng) -> float:
    # chains at hi and hi-1 move independently until they meet, then together
    x, y = hi - 1, hi
    t, acc = 0.0, 0.0
    while x != y and t < horizon:
        qx, qy = birth[x] + death[x], birth[y] + death[y]
        q = qx + qy
        hold = min(rng.standard_exponential() / q, horizon - t)
        acc -= (f_ext[y] - f_ext[x]) * hold
        t += hold
        u = rng.random() * q
        if u < qx:
            x += 1 if u < birth[x] else -1
        else:
            u -= qx
            y += 1 if u < birth[y] else -1
    return acc


def estimate_h_difference(config: SimConfig, f: TestFunction, i: int) -> SimEstimate:
    """Estimate ``h_f(i+1) - h_f(i)`` where

        h_f(k) = -int_0^inf (E f(Z_k(t)) - E f(Z^[n])) dt.

    The two chains started at ``i`` and ``i+1`` are coupled: they jump
    independently until they meet and move together afterwards, so the
    integrand vanishes from the meeting time on. The centring constant
    cancels in the difference. Paths still apart at the horizon are cut off
    there. For ``i < n`` the target is the Stein solution ``g[i+1]``; for
    ``i = n`` the upper chain starts at ``n+1`` and can only die (rate
    ``n+1``), with ``f(n+1) = 0``.
    """
    n = config.n
    if f.n != n:
        raise ValueError("test function and chain must share n")
    if not 0 <= i <= n:
        raise ValueError(f"i must lie in 0..{n}")
    horizon = config.horizon if config.horizon is not None else math.inf
    birth, death = rates(config.params, n)
    f_ext = np.append(f.values, 0.0)
    samples = np.array([_coupled_difference(birth, death, f_ext, i + 1, horizon, rng)
                        for rng in _streams(config)])
    return _estimate(samples)


def generator_h_difference(params: DistParams, n: int, f: TestFunction) -> float:
    """Exact ``h_f(n+1) - h_f(n)`` under the chain above: ``E f(Z^[n]) / (n+1)``.

    The chain sits at ``n+1`` for an ``Exp(n+1)`` time and then behaves like
    the chain from ``n``.
    """
    ef = truncate(params, n).expect(f.values)
    return ef / (n + 1)
