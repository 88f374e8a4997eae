import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write(path, text):
    path.write_text(text)
    return path


_CRITERIA_KEY = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Store a one-line pass/fail verdict for an acceptance criterion."""
    store = request.config.stash.setdefault(_CRITERIA_KEY, {})

    def record(number, title, passed, detail=""):
        store[number] = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA_KEY, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for k in sorted(store):
            terminalreporter.write_line(store[k])
