import pytest

from cabt.procdesc import default_description

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def desc():
    return default_description()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
