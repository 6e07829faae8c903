import numpy as np
import pytest

from mobo.problem import REACTOR_VARIABLES, DesignPoint

NAMES = [v.name for v in REACTOR_VARIABLES]


def design(T, t, r):
    return DesignPoint(zip(NAMES, (T, t, r)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(criterion, ok, detail):
        line = f"[criterion {criterion:>2}] {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
