import time

import pytest

from freefront.nonlinearity import Nonlinearity
from freefront.solver import InitialData
from freefront.threshold import find_sigma_star


@pytest.fixture(scope="session")
def logistic():
    return Nonlinearity.logistic()


@pytest.fixture(scope="session")
def bistable():
    return Nonlinearity.cubic_bistable(0.25)


@pytest.fixture(scope="session")
def logistic_threshold():
    """Default-tolerance threshold search for logistic f, alpha = 0.4, cosine data on [-1, 1]."""
    t0 = time.perf_counter()
    res = find_sigma_star(InitialData.cosine(1.0), Nonlinearity.logistic(), 0.4)
    return res, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    import acceptance_report

    if acceptance_report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_report.LINES:
            terminalreporter.write_line(line)
