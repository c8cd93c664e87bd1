import numpy as np
import pytest

from truncstein.distributions import DistParams, truncate, tv_distance
from truncstein.factors import exact_G2
from truncstein.simulate import (
    SimConfig,
    empirical_stationary,
    estimate_h_difference,
    generator_h_difference,
    mean_first_transition_from_zero,
    sharp_value_estimate,
    simulate_path,
)
from truncstein.stein import TestFunction, solve_forward

NB = DistParams.negative_binomial
PO = DistParams.poisson


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(PO(1), 3)
    with pytest.raises(ValueError):
        SimConfig(PO(1), 3, horizon=1.0, event_cap=3)
    with pytest.raises(ValueError):
        SimConfig(PO(1), 3, initial_state=5, horizon=1.0)
    with pytest.raises(ValueError):
        SimConfig(PO(1), 3, horizon=1.0, seed=-1)


def test_absorbing_when_n_zero():
    assert simulate_path(SimConfig(PO(2), 0, event_cap=10, seed=1)) == [(0.0, 0)]
    assert empirical_stationary(SimConfig(PO(2), 0, horizon=100.0)).probs.tolist() == [1.0]


def test_path_validity_and_determinism():
    cfg = SimConfig(NB(2, 0.4), 5, initial_state=2, event_cap=5000, seed=11)
    path = simulate_path(cfg)
    assert path == simulate_path(cfg)
    assert len(path) == 5001
    times = [t for t, _ in path]
    states = np.array([s for _, s in path])
    assert all(b > a for a, b in zip(times, times[1:]))
    assert states.min() >= 0 and states.max() <= 5
    steps = np.diff(states)
    assert set(np.unique(steps)) <= {-1, 1}
    assert not np.any(steps[states[:-1] == 5] == 1)
    assert not np.any(steps[states[:-1] == 0] == -1)
    assert simulate_path(SimConfig(NB(2, 0.4), 5, 2, event_cap=5000, seed=12)) != path


def test_horizon_path_stops_before_horizon():
    path = simulate_path(SimConfig(PO(3), 6, horizon=50.0, seed=2))
    assert path[-1][0] <= 50.0


def test_holding_times_match_exponential_rates():
    params, n = NB(2, 0.4), 5
    path = simulate_path(SimConfig(params, n, event_cap=200_000, seed=5))
    times = np.array([t for t, _ in path])
    states = np.array([s for _, s in path])[:-1]
    holds = np.diff(times)
    for i in range(n + 1):
        rate = (params.birth_rate(i) if i < n else 0.0) + i
        h = holds[states == i]
        se_mean = (1 / rate) / np.sqrt(len(h))
        assert abs(h.mean() - 1 / rate) < 3 * se_mean
        # Exp(rate) variance 1/rate^2; sample-variance s.e. is sqrt(8)/rate^2/sqrt(k)
        assert abs(h.var() - 1 / rate ** 2) < 3 * np.sqrt(8) / rate ** 2 / np.sqrt(len(h))


def test_first_transition_from_zero():
    est = mean_first_transition_from_zero(SimConfig(NB(2, 0.5), 6, event_cap=1, seed=3, replications=10_000))
    assert est.within(1.0)
    est = mean_first_transition_from_zero(SimConfig(PO(4), 8, event_cap=1, seed=3, replications=10_000))
    assert est.within(0.25)


def test_sharp_value_matches_stein_factor():
    params, n = NB(2, 0.4), 6
    tau = mean_first_transition_from_zero(SimConfig(params, n, event_cap=1, seed=9, replications=10_000))
    assert sharp_value_estimate(tau, params, n).within(exact_G2(params, n).exact)


def test_first_transition_needs_state_zero_and_moves():
    with pytest.raises(ValueError):
        mean_first_transition_from_zero(SimConfig(PO(1), 0, event_cap=1))
    with pytest.raises(ValueError):
        mean_first_transition_from_zero(SimConfig(PO(1), 3, initial_state=1, event_cap=1))


def test_stationary_error_shrinks_with_horizon():
    params, n = NB(2, 0.4), 6
    target = truncate(params, n)
    errs = []
    for T in (2_000.0, 8_000.0, 32_000.0):
        # pool several seeds so the comparison is not at the mercy of one path
        errs.append(np.mean([tv_distance(empirical_stationary(SimConfig(params, n, horizon=T, seed=s)), target)
                             for s in range(4)]))
    assert errs[0] > errs[1] > errs[2]


def test_h_difference_constant_function_is_zero():
    cfg = SimConfig(PO(1.5), 4, initial_state=1, horizon=1e4, seed=1, replications=200)
    est = estimate_h_difference(cfg, TestFunction(4, np.ones(5, bool)), 1)
    assert est.point == 0.0 and est.std_error == 0.0


def test_h_difference_hand_example():
    f = TestFunction.indicator(1, [0])
    est = estimate_h_difference(SimConfig(PO(1), 1, horizon=1e4, seed=4, replications=10_000), f, 0)
    assert est.within(0.5)


@pytest.mark.parametrize("i", range(6))
def test_h_difference_matches_stein_solution(i):
    params, n = NB(2, 0.4), 6
    f = TestFunction.indicator(n, [1, 3, 4])
    exact = solve_forward(params, n, f).g[i + 1]
    est = estimate_h_difference(SimConfig(params, n, horizon=1e4, seed=100 + i, replications=10_000), f, i)
    assert est.within(exact)


def test_h_difference_at_boundary_state():
    # the chain from n+1 waits Exp(n+1) then behaves like the chain from n,
    # so h(n+1) - h(n) = E f(Z^[n]) / (n+1); it is 0 only when E f(Z^[n]) = 0
    params, n = PO(1), 1
    f = TestFunction.indicator(n, [0])
    est = estimate_h_difference(SimConfig(params, n, horizon=1e4, seed=8, replications=10_000), f, n)
    assert est.within(generator_h_difference(params, n, f))
    assert generator_h_difference(params, n, f) == pytest.approx(0.25)
    empty = TestFunction.indicator(n, [])
    assert estimate_h_difference(SimConfig(params, n, horizon=1e4, seed=8, replications=500), empty, n).point == 0.0
