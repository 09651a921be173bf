import pytest

from sitsim.bio_params import rates_at
from sitsim.weather import Environment, build_environment, synth_weather


@pytest.fixture(scope="session")
def weather3y():
    return synth_weather(seed=1, days=3 * 365)


@pytest.fixture(scope="session")
def env3y(weather3y):
    return build_environment(weather3y)


@pytest.fixture(scope="session")
def ep25():
    return rates_at(25.0)


@pytest.fixture
def const_env(ep25):
    return Environment.constant(ep25, 202_000.0, 1500)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
