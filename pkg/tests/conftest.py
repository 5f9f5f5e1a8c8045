from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

_acceptance: dict = {}


@pytest.fixture
def data_dir() -> Path:
    return DATA


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number = dict(report.user_properties).get("criterion")
    if number is None:
        return
    prev = _acceptance.get(number, "PASS")
    _acceptance[number] = "FAIL" if (report.failed or prev == "FAIL") else prev


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        terminalreporter.write_line(f"criterion {number}: {_acceptance[number]}")
