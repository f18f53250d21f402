import pytest

_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one acceptance line; all lines are echoed in the terminal summary."""

    def record(tag: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {tag}: {detail}"
        _LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
