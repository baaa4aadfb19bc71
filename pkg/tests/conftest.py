import dataclasses

import pytest

from zsource_wind import simkit
from zsource_wind.scenario import load

# acceptance lines collected during the run and printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long closed-loop simulations")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


_CACHE = {}


def _run(name: str, lossless: bool):
    key = (name, lossless)
    if key not in _CACHE:
        sc = dataclasses.replace(load(name), lossless=lossless)
        _CACHE[key] = (sc, simkit.run(sc))
    return _CACHE[key]


@pytest.fixture(scope="session")
def fig8_lossless():
    return _run("fig8.json", True)


@pytest.fixture(scope="session")
def fig8_lossy():
    return _run("fig8.json", False)


@pytest.fixture(scope="session")
def fig7_lossless():
    return _run("fig7.json", True)


@pytest.fixture(scope="session")
def fig7_lossy():
    return _run("fig7.json", False)
