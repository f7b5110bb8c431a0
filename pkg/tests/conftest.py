import functools

import numpy as np
import pytest

from vako import boundary, problems


@functools.lru_cache(maxsize=None)
def solved(name, key="default", steps=500):
    """Shooting solution of a built-in BVP preset, cached across tests."""
    return boundary.shoot(problems.builtin(name).bvp(key, steps))


@pytest.fixture(scope="session")
def heis():
    return problems.builtin("heisenberg")


@pytest.fixture(scope="session")
def martinet():
    return problems.builtin("martinet")


@pytest.fixture(scope="session")
def flat3():
    return problems.builtin("flat-3")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        n, title = mark.args
        detail = getattr(item, "criterion_detail", "")
        _CRITERIA[n] = (title, report.passed, report.duration, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, duration, detail = _CRITERIA[n]
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title} ({duration:.1f}s)"
        terminalreporter.write_line(line + (f"  {detail}" if detail else ""))
