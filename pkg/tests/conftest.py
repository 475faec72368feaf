import warnings

import pytest

from adsim.guidance import GainConditionWarning


@pytest.fixture(autouse=True)
def _quiet_gain_warnings():
    # presets deliberately carry gains outside the fixed-time premise
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GainConditionWarning)
        yield


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
