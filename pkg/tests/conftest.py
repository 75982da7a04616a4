import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one verdict line per acceptance criterion for the terminal summary."""

    def put(criterion, ok, detail):
        _LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")

    return put


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
