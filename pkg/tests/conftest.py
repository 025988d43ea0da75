import numpy as np
import pytest

from heatcut import from_edges, generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def p3():
    return from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def k4():
    return generate("clique:n=4")


@pytest.fixture
def two_triangles():
    return from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance-gate criteria")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
