import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import free_space_radius_oracle, fspl_oracle, los_oracle, mean_loss_oracle
from uavtopo.channel import (
    ChannelParams,
    Placement,
    coverage_radius,
    dbm_to_watts,
    free_space_loss_db,
    free_space_radius,
    los_probability,
    mean_path_loss,
    received_power_dbm,
    watts_to_dbm,
)
from uavtopo.errors import ConfigError, DomainError, NumericalError, OutOfRangeError

CP = ChannelParams()
FREE = ChannelParams(excess_loss_los_db=0.0, excess_loss_nlos_db=0.0)

heights = st.floats(1.0, 3000.0)
grounds = st.floats(0.0, 30000.0)


def test_los_overhead_value():
    # frozen from the scalar oracle 1/(1 + 9.61 exp(-0.16 (90 - 9.61)))
    assert los_probability(100.0, 0.0, CP) == pytest.approx(0.999975074537903, abs=1e-15)


def test_los_elevation_limits():
    a, b = CP.sshape_a, CP.sshape_b
    assert los_probability(1e12, 1.0, CP) == pytest.approx(1 / (1 + a * math.exp(-b * (90 - a))), rel=1e-9)
    assert los_probability(1.0, 1e12, CP) == pytest.approx(1 / (1 + a * math.exp(a * b)), rel=1e-9)


@pytest.mark.parametrize("h,s", [(math.nan, 1.0), (100.0, math.inf), (0.0, 10.0), (10.0, -1.0)])
def test_los_rejects_bad_inputs(h, s):
    with pytest.raises(DomainError):
        los_probability(h, s, CP)


@given(heights, grounds)
def test_los_matches_oracle_and_is_open_unit(h, s):
    p = los_probability(h, s, CP)
    assert 0.0 < p < 1.0
    assert p == pytest.approx(los_oracle(h, s), rel=1e-12)


@given(st.floats(1.0, 2000.0), st.floats(1.0, 2000.0), st.floats(1.0, 5000.0))
def test_los_increasing_in_height(h, dh, s):
    assert los_probability(h + dh, s, CP) > los_probability(h, s, CP)


def test_zero_excess_is_free_space():
    for h, s in [(100.0, 0.0), (50.0, 700.0), (300.0, 2500.0)]:
        assert mean_path_loss(h, s, FREE) == free_space_loss_db(math.hypot(h, s), FREE.carrier_hz)


def test_mixture_example_at_known_los_probability():
    # pick the elevation at which p_LoS = 0.9 exactly, at slant range 1000 m
    a, b = CP.sshape_a, CP.sshape_b
    theta = math.radians(a + math.log(9 * a) / b)
    h, s = 1000 * math.sin(theta), 1000 * math.cos(theta)
    assert los_probability(h, s, CP) == pytest.approx(0.9, abs=1e-12)
    assert fspl_oracle(1000.0, 2.4e9) == pytest.approx(100.05, abs=0.01)
    assert mean_path_loss(h, s, CP) == pytest.approx(100.0520080561155 + 2.9, abs=1e-9)


def test_mean_loss_monotone_in_ground_distance():
    s = np.linspace(0.0, 30000.0, 20001)
    for h in (10.0, 100.0, 300.0, 2000.0):
        loss = mean_path_loss(np.full_like(s, h), s, CP)
        assert np.all(np.diff(loss) >= -1e-12)


def test_zero_distance_is_domain_error():
    with pytest.raises(DomainError):
        free_space_loss_db(0.0, 2.4e9)


@given(heights, grounds)
def test_mean_loss_bracketed_by_excess_losses(h, s):
    fs = fspl_oracle(math.hypot(h, s), CP.carrier_hz)
    loss = mean_path_loss(h, s, CP)
    assert fs + CP.excess_loss_los_db - 1e-9 <= loss <= fs + CP.excess_loss_nlos_db + 1e-9
    assert loss == pytest.approx(mean_loss_oracle(h, s, CP), rel=1e-12)


@given(st.floats(-20, 40), st.floats(-20, 40), heights, grounds)
def test_received_power_shift(p, q, h, s):
    diff = received_power_dbm(p, h, s, CP) - received_power_dbm(q, h, s, CP)
    assert diff == pytest.approx(p - q, abs=1e-9)


def test_received_power_identities():
    # choose h, s so that the loss is the target, by solving on free space
    d = 299_792_458.0 / (4 * math.pi * FREE.carrier_hz)  # 0 dB free-space loss
    assert received_power_dbm(17.0, d, 0.0, FREE) == pytest.approx(17.0, abs=1e-9)
    d100 = d * 10 ** (100 / 20)
    assert received_power_dbm(30.0, d100, 0.0, FREE) == pytest.approx(-70.0, abs=1e-9)


@given(st.floats(10, 30), heights, grounds)
def test_coverage_check_equivalence(p_tx, h, s):
    loss = mean_path_loss(h, s, CP)
    covered = received_power_dbm(p_tx, h, s, CP) >= CP.min_rx_power_dbm
    assert CP.min_rx_power_dbm == -90.0
    assert covered == (loss <= p_tx + 90.0) or abs(loss - (p_tx + 90.0)) < 1e-9


@given(st.floats(10.0, 1000.0), st.floats(1e8, 6e9), st.floats(0.0, 30.0))
def test_radius_matches_free_space_inversion(h, f, p_tx):
    cp = ChannelParams(carrier_hz=f, excess_loss_los_db=0.0, excess_loss_nlos_db=0.0)
    expect = free_space_radius_oracle(h, f, p_tx + 90.0)
    if expect > 30000.0:
        with pytest.raises(OutOfRangeError):
            coverage_radius(h, cp, p_tx)
        return
    assert coverage_radius(h, cp, p_tx) == pytest.approx(expect, abs=0.1)
    assert free_space_radius(h, cp, p_tx) == pytest.approx(expect, rel=1e-12, abs=1e-9)


def test_radius_nondecreasing_in_power():
    for h in (100.0, 200.0, 300.0):
        radii = [coverage_radius(h, CP, p) for p in np.linspace(-40, 30, 36)]
        assert all(b >= a - 0.1 for a, b in zip(radii, radii[1:]))


def test_radius_zero_when_altitude_exhausts_budget():
    d_max = free_space_radius_oracle(0.0, FREE.carrier_hz, -60.0 + 90.0)
    assert coverage_radius(d_max * 1.5, FREE, -60.0) == 0.0
    with pytest.raises(OutOfRangeError):
        coverage_radius(d_max * 1.5, FREE, -60.0, strict=True)


def test_radius_unreachable_threshold():
    with pytest.raises(OutOfRangeError):
        coverage_radius(100.0, FREE, 40.0, search_bound_m=1000.0)


def test_radius_detects_non_monotone_loss():
    cp = ChannelParams()
    # bypass validation to build the pathological LoS-heavier-than-NLoS case
    object.__setattr__(cp, "excess_loss_los_db", 60.0)
    object.__setattr__(cp, "excess_loss_nlos_db", 0.0)
    with pytest.raises(NumericalError, match="not monotone"):
        coverage_radius(100.0, cp, 30.0)


def test_radius_rejects_non_finite():
    with pytest.raises(DomainError):
        coverage_radius(math.nan, CP, 20.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"sshape_a": 0.0},
        {"sshape_b": -1.0},
        {"carrier_hz": 0.0},
        {"excess_loss_los_db": 5.0, "excess_loss_nlos_db": 1.0},
        {"excess_loss_los_db": -1.0},
    ],
)
def test_channel_params_validation(kwargs):
    with pytest.raises(ConfigError):
        ChannelParams(**kwargs)


def test_loss_threshold_is_derived():
    assert CP.loss_threshold_db(20.0) == 110.0


def test_placement_validation():
    ok = Placement([[0, 0], [10, 10]], [[5, 5, 100]], 3000)
    assert (ok.n_gus, ok.n_uavs) == (2, 1)
    assert ok.ground_distances().shape == (1, 2)
    with pytest.raises(ConfigError):
        Placement([[0, 0]], [[5, 5, 0]], 3000)
    with pytest.raises(ConfigError):
        Placement([[0, 3001]], [[5, 5, 100]], 3000)
    with pytest.raises(ConfigError):
        Placement(np.empty((0, 2)), [[5, 5, 100]], 3000)


@given(st.floats(-50, 50))
def test_dbm_watts_round_trip(dbm):
    assert watts_to_dbm(dbm_to_watts(dbm)) == pytest.approx(dbm, abs=1e-9)


def test_zero_watts_is_silent():
    assert watts_to_dbm(0.0) == -math.inf
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
