import sys

import numpy as np
import pytest

from pdqp.circuit import Circuit, Step
from pdqp.rng import make_rng
from pdqp.statevector import CNot, Hadamard


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def bell_measure():
    """Bell pair, collapse qubit 0 at step 1, one more empty step."""
    return Circuit(2, [Step([Hadamard(0), CNot(0, 1)], (0,)), Step()])


def binomial_ok(count, n, p, sigmas=5):
    sd = np.sqrt(n * p * (1 - p))
    return abs(count - n * p) <= sigmas * sd + 1e-9


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, when the gate ran."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        title, ok, detail = results[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key} ({title}): {detail}")
