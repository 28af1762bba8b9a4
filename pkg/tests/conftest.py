import pytest

from tmkit import corpus
from tmkit.simulate import SimConfig


@pytest.fixture(scope="session")
def berthing():
    return corpus.load("berthing")


@pytest.fixture(scope="session")
def cof():
    return corpus.load("cof")


@pytest.fixture(scope="session")
def berthing_config():
    return SimConfig.load(corpus.config_path("berthing"))


@pytest.fixture(scope="session")
def cof_config():
    return SimConfig.load(corpus.config_path("cof"))


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY

    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
