"""Shared test plumbing.

The acceptance tests record one verdict line per criterion; printing them
from inside a test would be swallowed by pytest's fd-level capture, so
they are replayed in the terminal summary instead.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
