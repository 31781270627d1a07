import numpy as np
import pytest

from rpm3.gf import PrimeField

BIG_Q = 2147483647


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def f7():
    return PrimeField(7)


@pytest.fixture
def fbig():
    return PrimeField(BIG_Q)


def schoolbook(a, b, q):
    """Triple-loop product on nested lists; the oracle for every matmul check."""
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0
            for t in range(inner):
                acc += a[i][t] * b[t][j]
            out[i][j] = acc % q
    return out


# --- acceptance report: one PASS/FAIL line per criterion ---------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _criteria[num] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, status = _criteria[num]
        terminalreporter.write_line(f"[{status}] criterion {num:2d}: {title}")
