import os

import numpy as np
import pytest

from finer import _accel

DATA = os.path.join(os.path.dirname(__file__), "data")
BACKENDS = ["numba", "numpy"] if _accel.HAVE_NUMBA else ["numpy"]

# criterion -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(params=BACKENDS)
def each_backend(request):
    with _accel.backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def data_path(name):
    return os.path.join(DATA, name)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
