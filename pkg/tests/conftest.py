import functools
from pathlib import Path

import numpy as np
import pytest

from rqlp.linalg import singular_values
from rqlp.testmat import SpectrumSpec, heat_matrix, make_matrix, phillips_matrix, spectrum

DATA = Path(__file__).parent / "data"

# acceptance criteria append (name, passed, detail) here; printed at session end
ACCEPTANCE_RESULTS = []


@functools.lru_cache(maxsize=None)
def family_matrix(family: str, n: int = 400):
    """(A, exact or oracle singular values) for one experiment family."""
    a = make_matrix(family, n)
    if family == "pds":
        sv = spectrum(SpectrumSpec(n, "pds", 30, 2.0))
    elif family == "eds":
        sv = spectrum(SpectrumSpec(n, "eds", 30, 1.0 / 20.0))
    else:
        sv = singular_values(a)
    a.flags.writeable = False
    return a, sv


@pytest.fixture
def rand():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def heat400():
    return family_matrix("heat")


@pytest.fixture(scope="session")
def pds400():
    return family_matrix("pds")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
