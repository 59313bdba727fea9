import time
from contextlib import contextmanager

import numpy as np
import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(request):
    """Context manager that records one PASS/FAIL line per acceptance criterion."""
    results = request.config.stash.setdefault(_RESULTS, {})

    @contextmanager
    def check(number, title):
        notes = []
        start = time.perf_counter()
        try:
            yield notes
        except BaseException as exc:
            detail = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            results[number] = ("FAIL", title, time.perf_counter() - start, notes + [detail])
            raise
        results[number] = ("PASS", title, time.perf_counter() - start, notes)

    return check


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, title, seconds, notes = results[number]
        line = f"criterion {number}: {status}  {title} ({seconds:.1f} s)"
        if notes:
            line += "; " + "; ".join(notes)
        terminalreporter.write_line(line)
