import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def record_criterion():
    """Store one result line per criterion for the terminal summary."""

    def record(key, line):
        ACCEPTANCE_LINES[key] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
