import numpy as np
import pytest

from rdb_regions.regions import DiscreteInstance


def bsc(e):
    return np.array([[1 - e, e], [e, 1 - e]])


def h2(p):
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def random_binary_instance(rng):
    pst = rng.dirichlet(np.ones(4)).reshape(2, 2)
    e1, e2 = rng.uniform(0, 0.5, 2)
    return DiscreteInstance.build(pst, bsc(e1), bsc(e2))


@pytest.fixture
def noiseless_ts():
    return DiscreteInstance.build(np.diag([0.5, 0.5]), np.eye(2), np.eye(2))


@pytest.fixture
def bsc_ts():
    return DiscreteInstance.build(np.diag([0.5, 0.5]), bsc(0.1), bsc(0.2))


@pytest.fixture
def dead_ts():
    return DiscreteInstance.build(np.diag([0.5, 0.5]), bsc(0.5), bsc(0.5))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
