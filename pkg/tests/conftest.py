import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record a one-line acceptance verdict; all lines are repeated in the terminal summary."""

    def record(text: str):
        print(text)
        ACCEPTANCE_LINES.append(text)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
