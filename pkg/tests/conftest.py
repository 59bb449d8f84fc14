import pytest

from boundedtype.confmap import GraphDomain, build_map
from boundedtype.profiles import make_profile, tame_minorant, tame_majorant


@pytest.fixture(scope="session")
def sqrt_minorant():
    return tame_minorant(make_profile("exp(-sqrt(abs(x)))"))


@pytest.fixture(scope="session")
def exp_majorant():
    return tame_majorant(make_profile("exp(-abs(x))"))


@pytest.fixture(scope="session")
def minorant_map(sqrt_minorant):
    return build_map(GraphDomain(sqrt_minorant, -1))


@pytest.fixture(scope="session")
def majorant_map(exp_majorant):
    return build_map(GraphDomain(exp_majorant, -1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
