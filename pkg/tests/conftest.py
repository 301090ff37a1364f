import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hitchin_sov.harness import generic_model

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20260)


def make_model(lie, g=2, seed=0):
    return generic_model(lie, g, np.random.default_rng(seed))


@pytest.fixture(scope="module")
def a1():
    return make_model("A1", 2, 1)


@pytest.fixture(scope="module")
def d2():
    return make_model("D2", 2, 5)


@pytest.fixture(scope="module")
def c2():
    return make_model("C2", 2, 2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
