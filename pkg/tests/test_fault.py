import itertools
import math

import numpy as np
import pytest

from truncstein.distributions import DistParams, tail_probability
from truncstein.factors import exact_G2
from truncstein.fault import (
    FaultParams,
    fault_count_law,
    order_p_sweep,
    proposition_bounds,
    truncation_matters,
)

GRID = [(N, R, p) for N in (5, 10, 30) for R in (1, 2, 5) for p in (0.5, 0.1, 0.01, 0.001)]


def enumerate_law_exact(N, R, p, fault_day_repairs=True):
    block = R - 1 if fault_day_repairs else R
    law = {}

    def walk(day, blocked, w, prob):
        if day == N:
            law[w] = law.get(w, 0.0) + prob
            return
        if blocked:
            walk(day + 1, blocked - 1, w, prob)
            return
        walk(day + 1, 0, w, prob * (1 - p))
        walk(day + 1, block, w + 1, prob * p)

    walk(0, 0, 0, 1.0)
    return law


def as_vector(law, n):
    out = np.zeros(n + 1)
    for w, pr in law.items():
        out[w] += pr
    return out


def test_single_day_is_bernoulli():
    for R in (1, 2, 7):
        law = fault_count_law(FaultParams(1, R, 0.3))
        np.testing.assert_allclose(law.probs[:2], [0.7, 0.3], atol=1e-15)


def test_two_day_tree():
    law = fault_count_law(FaultParams(2, 2, 0.5))
    assert law.n == 2
    np.testing.assert_allclose(law.probs, [0.25, 0.75, 0.0], atol=1e-15)


@pytest.mark.parametrize("N", [1, 3, 8, 30])
def test_no_blocking_is_binomial(N):
    p = 0.2
    law = fault_count_law(FaultParams(N, 1, p))
    binom = [math.comb(N, k) * p ** k * (1 - p) ** (N - k) for k in range(N + 1)]
    np.testing.assert_allclose(law.probs[: N + 1], binom, atol=1e-12)


@pytest.mark.parametrize("N,R", [(5, 2), (7, 3), (9, 4), (6, 1), (10, 5)])
@pytest.mark.parametrize("fault_day_repairs", [True, False])
def test_dp_matches_enumeration(N, R, fault_day_repairs):
    fp = FaultParams(N, R, 0.37, fault_day_repairs)
    expected = as_vector(enumerate_law_exact(N, R, 0.37, fault_day_repairs), fp.n)
    np.testing.assert_allclose(fault_count_law(fp).probs, expected, atol=1e-14)


@pytest.mark.parametrize("N,R,p", GRID)
def test_support_and_mass(N, R, p):
    fp = FaultParams(N, R, p)
    law = fault_count_law(fp)
    top = -(-N // R)
    assert top <= fp.n == N // R + 1
    assert np.all(law.probs[top + 1:] == 0)
    assert abs(math.fsum(law.probs) - 1) <= 1e-12


def test_alternate_convention_support():
    fp = FaultParams(10, 3, 0.6, fault_day_repairs=False)
    law = fault_count_law(fp)
    assert np.all(law.probs[-(-10 // 4) + 1:] == 0)


def test_proposition_example():
    cmp = proposition_bounds(FaultParams(2, 2, 0.5))
    assert cmp.lam == pytest.approx(0.75, abs=1e-15)
    assert cmp.var_w == pytest.approx(0.1875, abs=1e-15)
    assert cmp.bound_untrunc == pytest.approx((1 - math.exp(-0.75)) * 0.75, rel=1e-14)


@pytest.mark.parametrize("N,R,p", GRID)
def test_bounds_on_grid(N, R, p):
    cmp = proposition_bounds(FaultParams(N, R, p))
    assert cmp.var_w <= cmp.lam
    assert 0 <= cmp.tv_trunc <= 1 and 0 <= cmp.tv_untrunc <= 1
    assert cmp.tv_trunc <= cmp.bound_trunc + 1e-12
    assert cmp.tv_untrunc <= cmp.bound_untrunc + 1e-12
    assert cmp.bound_trunc <= cmp.bound_untrunc
    if truncation_matters(cmp):
        assert cmp.bound_trunc < cmp.bound_untrunc
        ratio = cmp.bound_trunc / cmp.bound_untrunc
        pi0 = 1 / math.fsum(cmp.lam ** k / math.factorial(k) for k in range(cmp.n + 1))
        assert ratio == pytest.approx((1 - pi0) / (1 - math.exp(-cmp.lam)), rel=1e-10)


@pytest.mark.parametrize("N,R,p", GRID)
def test_truncated_bound_is_lambda_times_stein_factor(N, R, p):
    cmp = proposition_bounds(FaultParams(N, R, p))
    g2 = exact_G2(DistParams.poisson(cmp.lam), cmp.n).bound
    assert cmp.bound_trunc == pytest.approx(cmp.lam * g2 * (1 - cmp.var_w / cmp.lam), rel=1e-12, abs=1e-300)


def test_truncation_gain_when_lambda_near_n():
    cmp = proposition_bounds(FaultParams(5, 2, 0.5))
    assert tail_probability(DistParams.poisson(cmp.lam), cmp.n) > 0.05
    assert cmp.bound_trunc < cmp.bound_untrunc - 1e-3


def test_order_p_sweep_records():
    recs = order_p_sweep(10, 3, [1e-1, 1e-2, 1e-3, 1e-4])
    assert recs[0]["slope"] is None
    # the dispersion factor 1 - Var W / E W vanishes linearly in p
    disp = np.array([r["dispersion"] for r in recs])
    ratios = disp / np.array([r["p"] for r in recs])
    assert abs(ratios[-1] / ratios[-2] - 1) < 0.01
    # E W approaches N p once blocking is negligible
    assert recs[-1]["comparison"].lam / (10 * 1e-4) == pytest.approx(1, rel=1e-2)


def test_order_p_sweep_actual_scaling():
    # with N fixed, lam ~ N p and 1 - Var/lam ~ p, so the truncated bound scales like p^2
    recs = order_p_sweep(10, 3, [1e-2, 1e-3, 1e-4, 1e-5])
    for r in recs[1:]:
        assert r["slope"] == pytest.approx(2.0, abs=0.05)


def test_order_p_sweep_rejects_increasing():
    with pytest.raises(ValueError):
        order_p_sweep(10, 3, [1e-3, 1e-2])


def test_fault_params_validation():
    for args in [(0, 1, 0.5), (3, 0, 0.5), (3, 1, 0.0), (3, 1, 1.0)]:
        with pytest.raises(ValueError):
            FaultParams(*args)
