import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from uavtopo.channel import ChannelParams, Placement
from uavtopo.game import AliceParams, UavGameParams
from uavtopo.scenario import Scenario, generate_scenario

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_scenario(uav_xyz, gu_xy, area=3000.0, phis=None, channel=None, alice=None):
    uav_xyz = np.asarray(uav_xyz, dtype=float)
    j = len(uav_xyz)
    phis = [1.0] * j if phis is None else phis
    ups = [UavGameParams(float(phi), 10 ** 0.1, 0.01, 1.0) for phi in phis]
    return Scenario(
        Placement(np.asarray(gu_xy, dtype=float), uav_xyz, area),
        channel or ChannelParams(),
        ups,
        alice or AliceParams(),
        np.full(len(gu_xy), 5.0),
    )


@pytest.fixture(scope="session")
def default_scenario():
    return generate_scenario(0)


@pytest.fixture(scope="session")
def small_scenario():
    return generate_scenario(3, n_uavs=4, n_gus=6)


@pytest.fixture(scope="session")
def toy_scenario():
    return generate_scenario(0, n_uavs=3, n_gus=4)


_acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_report():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
