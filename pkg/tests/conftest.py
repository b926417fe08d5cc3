import numpy as np
import pytest

from curveflow.geometry import SupportCurve

ACCEPTANCE_LINES = []


def harmonic(n, eps, M=256, R=1.0):
    return SupportCurve.from_function(lambda t: R + eps * np.cos(n * t), M)


@pytest.fixture
def h2():
    return harmonic(2, 0.1, M=64)


@pytest.fixture
def circle():
    return SupportCurve.from_function(lambda t: np.full_like(t, 1.7), 64)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
