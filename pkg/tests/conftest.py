import numpy as np
import pytest
from hypothesis import settings

from fppflow.lattice import ContinuousDomain, discretize

settings.register_profile("fppflow", deadline=None, max_examples=40)
settings.load_profile("fppflow")


@pytest.fixture(scope="session")
def square():
    return ContinuousDomain.unit_square()


@pytest.fixture(scope="session")
def square_lattices(square):
    return {n: discretize(square, n) for n in (2, 4, 8, 16, 32, 64)}


def box_dinf(X, lo, hi):
    """Sup-norm distance from points to a closed box, computed coordinatewise."""
    X = np.asarray(X, float)
    gap = np.maximum(np.maximum(np.asarray(lo) - X, X - np.asarray(hi)), 0.0)
    return gap.max(axis=1)



DETAILS = {}
OUTCOMES = []


@pytest.fixture
def criterion(request):
    """Attach a one-line measurement to an acceptance test; summarised after the run."""
    def note(detail):
        DETAILS[request.node.name] = detail
        print(f"{request.node.name}: {detail}")
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    out = yield
    rep = out.get_result()
    if "criterion" in item.fixturenames and (rep.when == "call" or rep.failed):
        OUTCOMES.append((item.name, "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in OUTCOMES:
        detail = DETAILS.get(name, "")
        terminalreporter.write_line(f"{outcome}  {name}" + (f"  [{detail}]" if detail else ""))
