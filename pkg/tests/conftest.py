import logging

import pytest

from abdsolve.games import build_battleships, build_kuhn, build_leduc

logging.getLogger("abdsolve").setLevel(logging.ERROR)

KUHN_VALUE = -1.0 / 18.0
# frozen oracle values (independent enumeration, see the individual tests)
LEDUC_UNIFORM_EU = -0.078125
LEDUC_VALUE = -0.0857907
BS22_VALUE = 0.25


@pytest.fixture(scope="session")
def kuhn():
    return build_kuhn()


@pytest.fixture(scope="session")
def bs22():
    return build_battleships()


@pytest.fixture(scope="session")
def leduc():
    return build_leduc()


# one line per acceptance criterion, filled in by test_acceptance
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
