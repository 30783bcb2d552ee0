import math

import pytest

from bohmorder.models import make_model

C = math.sqrt(2.0) / 2.0


@pytest.fixture(scope="session")
def h3():
    return make_model("harmonic3", a=1.0, b=1.0)


@pytest.fixture(scope="session")
def quartic():
    return make_model("harmonic4quartic")


@pytest.fixture(scope="session")
def wp():
    return make_model("wispuj")


@pytest.fixture(scope="session")
def hh():
    return make_model("henonheiles3")


def pytest_terminal_summary(terminalreporter):
    from tests.test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
