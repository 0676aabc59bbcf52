import numpy as np
import pytest

from beampower.demand import generate_synthetic
from beampower.env import BeamPowerEnv, RewardConfig, SatelliteConfig, Scenario
from beampower.linkbudget import BeamParams, ModcodScheme, ModcodTable


@pytest.fixture
def toy_table():
    return ModcodTable([
        ModcodScheme("A", 0.5, 0.0),
        ModcodScheme("B", 1.0, 3.0),
        ModcodScheme("C", 2.0, 7.0),
    ])


@pytest.fixture
def beam():
    return BeamParams(g_tx=50.2, g_rx=39.3, fspl=209.0, bw=800e6, p_max=-80.0)


@pytest.fixture(scope="session")
def scenario():
    return Scenario(n_beams=4, n_steps=200, train_stop=100, test_start=100, test_stop=200)


@pytest.fixture(scope="session")
def sat(scenario):
    return scenario.satellite()


@pytest.fixture(scope="session")
def demand(scenario, sat):
    return generate_synthetic(scenario.n_beams, scenario.n_steps, scenario.step_minutes,
                              scenario.demand_seed, scenario.peak_demand(sat))


@pytest.fixture
def env(scenario, sat, demand):
    return BeamPowerEnv(sat, demand, scenario.split("train"), scenario.reward_config(sat))


def two_beam_sat(p_total):
    # two identical beams whose p_max is exactly 10 W
    b = BeamParams(g_tx=50.5, g_rx=39.5, fspl=209.5, bw=700e6, p_max=10.0)
    return SatelliteConfig([b, b], p_total)


@pytest.fixture
def reward_cfg():
    return RewardConfig(alpha=100.0)


def random_rows(rng, n, hi):
    return rng.uniform(0.0, 1.0, size=(n, hi.size)) * hi


_CRITERIA = {}


@pytest.fixture(scope="session")
def record_criterion():
    """Store one pass/fail line per acceptance criterion for the summary."""
    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
