"""Shared pytest wiring.

The acceptance suite records one verdict line per criterion; this plugin
echoes them in a dedicated section of the terminal summary so the pass/fail
status of every criterion is visible even when per-test stdout is captured.
"""

import pytest


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record_verdict(request):
    """Callable that stores a criterion verdict line for the summary."""

    def record(line: str) -> None:
        request.config._acceptance_lines.append(line)
        print(line)

    return record
