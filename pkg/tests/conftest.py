import pytest

from corrsyn.numerics import gauss_hermite

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def rule():
    return gauss_hermite()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].strip("#:"))):
            terminalreporter.write_line(line)
