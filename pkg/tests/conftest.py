import numpy as np
import pytest

from cpnest.cp_kernel import KruskalModel

# filled by test_acceptance, printed at the end of the session
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_model(rng, shape, rank):
    return KruskalModel([rng.standard_normal((n, rank)) for n in shape])


@pytest.fixture
def small_problem(rng):
    shape, rank = (4, 3, 2), 2
    t = rng.standard_normal(shape)
    return t, random_model(rng, shape, rank)
