import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tunnelguard.classifier import ClassifierConfig  # noqa: E402
from tunnelguard.features import load_dictionary  # noqa: E402


@pytest.fixture(scope="session")
def dictionary():
    return load_dictionary()


@pytest.fixture(scope="session")
def default_cfg():
    return ClassifierConfig.default()


_acceptance: dict[int, tuple[str, bool, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    prev = _acceptance.get(number, (title, True, 0.0))
    timed = dict(item.user_properties).get("runtime")
    _acceptance[number] = (title, prev[1] and report.passed, timed if timed is not None else prev[2] + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, ok, secs = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title} ({secs:.2f}s)")
