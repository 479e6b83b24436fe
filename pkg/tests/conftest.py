import numpy as np
import pytest

from weakvals.qkernel import StateVector

_CRITERIA_LINES = []


@pytest.fixture
def criterion_log():
    """Collects one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def log(number, passed, detail):
        line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def plus():
    return StateVector.normalized([1, 1])


@pytest.fixture
def zero():
    return StateVector.basis(2, 0)
