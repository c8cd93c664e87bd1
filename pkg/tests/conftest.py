import numpy as np
import pytest

from truncstein import DistParams, TestFunction


@pytest.fixture
def rng():
    return np.random.default_rng(20240615)


def random_params(rng) -> DistParams:
    if rng.random() < 0.25:
        return DistParams.poisson(float(rng.uniform(0.1, 8.0)))
    return DistParams.negative_binomial(float(rng.uniform(0.2, 12.0)), float(rng.uniform(0.05, 0.95)))


def random_set(rng, n: int) -> TestFunction:
    return TestFunction(n, rng.random(n + 1) < 0.5)


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.REPORT:
        terminalreporter.write_line(line)
