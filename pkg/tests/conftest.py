import numpy as np
import pytest

from rhmlab.grammar import RhmParams, RuleSet, sample_ruleset

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_params():
    return RhmParams(3, 2, 2, 2)


@pytest.fixture
def tiny_rules(tiny_params):
    return sample_ruleset(tiny_params, 7)


@pytest.fixture
def xor_rules():
    """v=2, s=2, one layer: 1 -> {(1,1),(2,2)}, 2 -> {(1,2),(2,1)} (0-based below)."""
    table = np.array([[[0, 0], [1, 1]], [[0, 1], [1, 0]]])
    return RuleSet(RhmParams(2, 2, 2, 1), (table,))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
