"""Root pytest config: registry for acceptance verdict lines.

Tests record one line per criterion via the record_verdict fixture; the
terminal-summary hook echoes them after the run so they survive output
capture and land in piped logs.
"""

import pytest

ACCEPTANCE_VERDICTS = []


@pytest.fixture
def record_verdict():
    def _record(num: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
        ACCEPTANCE_VERDICTS.append(line)
        assert ok, line
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.line(line)
