"""Collects the one-line acceptance verdicts and repeats them in the summary."""

import pytest

_LINES = []


@pytest.fixture
def acceptance_log():
    return _LINES


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
