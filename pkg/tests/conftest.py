import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import runs  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if runs.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in runs.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
