"""Echo the acceptance verdict lines after the run.

Per-test output capture works at the file descriptor level, so verdicts
printed while a passing test runs never reach the terminal. The acceptance
module records each line in its VERDICT_LINES list; this hook replays them
once capture is out of the way.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "VERDICT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance verdicts")
        for line in lines:
            terminalreporter.write_line(line)
