"""Echoes recorded criterion verdict lines after the run; mirrors the root
conftest so this package's tests also work when run standalone."""

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
        terminalreporter.section("acceptance criteria (secondary)")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.line(line)
