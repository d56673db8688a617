import numpy as np
import pytest
from scipy import sparse

from evdnr.milp import LpArrays
from evdnr.network import load_fixture


def make_arrays(c, A, sense, rhs, lo, hi, integer=None):
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, c.size)
    integer = np.zeros(c.size, bool) if integer is None else np.asarray(integer, bool)
    return LpArrays(c, sparse.csr_matrix(A), np.asarray(sense, np.int8), np.asarray(rhs, float),
                    np.asarray(lo, float), np.asarray(hi, float), integer)


@pytest.fixture(scope="session")
def fixture_instance():
    return load_fixture()


@pytest.fixture
def arrays():
    return make_arrays


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Call the returned function with the criterion number, a short name and
    a detail string once the measurement is done; the verdict follows the
    test outcome.
    """
    rec = {}

    def record(number, name, detail=""):
        rec.update(number=number, name=name, detail=detail)

    yield record
    if rec:
        failed = getattr(request.node, "rep_call", None)
        ok = failed is not None and failed.passed
        ACCEPTANCE_LINES.append((rec["number"], f"{'PASS' if ok else 'FAIL'} criterion {rec['number']}: "
                                                 f"{rec['name']}  {rec['detail']}".rstrip()))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
