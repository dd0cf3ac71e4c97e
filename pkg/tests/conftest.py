import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per numbered criterion
# ---------------------------------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    n, title = marker
    failed = report.failed
    if report.when == "call" or failed:
        prev = _CRITERIA.get(n, (title, "PASS"))[1]
        _CRITERIA[n] = (title, "FAIL" if failed or prev == "FAIL" else
                        ("SKIP" if report.skipped else "PASS"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title}")
