"""Shared fixtures and the acceptance summary hook.

Acceptance tests register one verdict per criterion; the hook prints them
as a block at the end of the run so the pass/fail lines are visible
without -s.
"""

import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Callable: acceptance(n, ok, detail) records and asserts a criterion."""

    def record(n, ok, detail):
        _ACCEPTANCE.append((n, ok, detail))
        line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        assert ok, line

    return record


@pytest.fixture
def acceptance_skip():
    def record(n, detail):
        _ACCEPTANCE.append((n, None, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(_ACCEPTANCE):
        verdict = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"ACCEPTANCE {n}: {verdict} - {detail}")
