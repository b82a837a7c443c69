from __future__ import annotations

import pytest

from paysim import new_chain

from .helpers import World

_criteria: dict[int, tuple[str, str]] = {}


@pytest.fixture
def world() -> World:
    return World(new_chain())


@pytest.fixture
def cash(world):
    return world.cash_class(supply=0)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "criterion", None)
    if marker:
        number, title = marker
        verdict = "PASS" if report.passed else "FAIL"
        if _criteria.get(number, (title, "PASS"))[1] == "FAIL":
            verdict = "FAIL"
        _criteria[number] = (title, verdict)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m:
        report.criterion = m.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title}")
