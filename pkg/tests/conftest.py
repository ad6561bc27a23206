import datetime as dt

import pytest

from spinres.data import synthetic_household, write_uci_file

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def household_file(tmp_path_factory):
    """Synthetic UCI-format file: 300 gap-free hours followed by one missing hour."""
    path = tmp_path_factory.mktemp("uci") / "household_power_consumption.txt"
    write_uci_file(path, dt.datetime(2007, 2, 1, 0, 0), synthetic_household(302, seed=1,
                                                                           gap_hours=(300,)))
    return path


@pytest.fixture
def record():
    """Record one acceptance line: record(number, passed, detail)."""

    def _record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
