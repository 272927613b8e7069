import numpy as np
import pytest

from lpdens.domain import AxisBox, EstimationContext, PolySector


@pytest.fixture
def unit_square():
    return AxisBox([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def center_ctx(unit_square):
    return EstimationContext(unit_square, [0.5, 0.5])


@pytest.fixture
def sector_ctx():
    def make(k):
        return EstimationContext(PolySector(k), [0.0, 0.0], h_max=1.0)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_log(request):
    """Record ``(criterion, passed, detail)``; printed in the terminal summary."""
    store = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, title, passed, detail=""):
        store[number] = (title, bool(passed), detail)
        return passed

    return record


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        title, passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
