"""Probabilistic air-to-ground channel.

The channel is evaluated in dB throughout; the game module works in watts.
All conversions between the two go through the helpers at the top of this
module so that no bare ``10 ** (x / 10)`` is scattered around the code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericalError, OutOfRangeError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

RADIUS_TOL_M = 0.1
RADIUS_MAX_ITER = 200
MONOTONE_PROBE_POINTS = 32


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    """Watts to dBm; zero power maps to ``-inf`` (a silent transmitter)."""
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(w) + 30.0


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ChannelParams:
    """Environment constants of the A2G link.

    ``sshape_a``/``sshape_b`` are the logistic constants of the LoS
    probability; defaults are the usual urban values.
    """

    sshape_a: float = 9.61
    sshape_b: float = 0.16
    carrier_hz: float = 2.4e9
    excess_loss_los_db: float = 1.0
    excess_loss_nlos_db: float = 20.0
    min_rx_power_dbm: float = -90.0

    def __post_init__(self):
        if not (self.sshape_a > 0 and self.sshape_b > 0 and self.carrier_hz > 0):
            raise ConfigError("ChannelParams: sshape_a, sshape_b and carrier_hz must be > 0")
        if not self.excess_loss_nlos_db >= self.excess_loss_los_db >= 0:
            raise ConfigError(
                "ChannelParams: need excess_loss_nlos_db >= excess_loss_los_db >= 0, got "
                f"{self.excess_loss_nlos_db} / {self.excess_loss_los_db}"
            )

    def loss_threshold_db(self, p_tx_dbm: float) -> float:
        """Largest mean path loss that still delivers ``min_rx_power_dbm``."""
        return p_tx_dbm - self.min_rx_power_dbm


@dataclass(frozen=True)
class Placement:
    """Ground users on the plane and UAVs in the air, all in metres."""

    gu_xy: np.ndarray
    uav_xyz: np.ndarray
    area_bound_m: float

    def __post_init__(self):
        gu = np.asarray(self.gu_xy, dtype=float).reshape(-1, 2)
        uav = np.asarray(self.uav_xyz, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "gu_xy", gu)
        object.__setattr__(self, "uav_xyz", uav)
        if len(gu) < 1 or len(uav) < 1:
            raise ConfigError("Placement needs at least one GU and one UAV")
        if self.area_bound_m <= 0:
            raise ConfigError("area_bound_m must be positive")
        for name, arr in (("gu_xy", gu), ("uav_xyz", uav)):
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} has non-finite entries")
            if np.any(arr < 0) or np.any(arr > self.area_bound_m):
                raise ConfigError(f"{name} leaves the square [0, {self.area_bound_m}]")
        if np.any(uav[:, 2] <= 0):
            raise ConfigError("UAV altitudes must be positive")

    @property
    def n_gus(self) -> int:
        return len(self.gu_xy)

    @property
    def n_uavs(self) -> int:
        return len(self.uav_xyz)

    def ground_distances(self) -> np.ndarray:
        """Horizontal UAV-GU distances, shape (J, I)."""
        diff = self.uav_xyz[:, None, :2] - self.gu_xy[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


def los_probability(h, s, cp: ChannelParams):
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(s))):
        raise DomainError("los_probability: non-finite altitude or ground distance")
    if np.any(h <= 0) or np.any(s < 0):
        raise DomainError("los_probability: need h > 0 and s >= 0")
    # arctan2 gives exactly 90 degrees at s = 0
    theta_deg = np.degrees(np.arctan2(h, s))
    a, b = cp.sshape_a, cp.sshape_b
    return _scalar_or_array(1.0 / (1.0 + a * np.exp(-b * (theta_deg - a))))


def free_space_loss_db(d, carrier_hz: float):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("free-space loss needs a positive distance")
    return _scalar_or_array(20.0 * np.log10(4.0 * math.pi * carrier_hz * d / SPEED_OF_LIGHT))


def mean_path_loss(h, s, cp: ChannelParams):
    """LoS/NLoS losses averaged with the elevation-dependent LoS probability."""
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    p_los = np.asarray(los_probability(h, s, cp))
    fspl = np.asarray(free_space_loss_db(np.hypot(h, s), cp.carrier_hz))
    loss = fspl + p_los * cp.excess_loss_los_db + (1.0 - p_los) * cp.excess_loss_nlos_db
    return _scalar_or_array(loss)


def received_power_dbm(p_tx_dbm, h, s, cp: ChannelParams):
    return _scalar_or_array(np.asarray(p_tx_dbm, dtype=float) - mean_path_loss(h, s, cp))


def free_space_radius(h: float, cp: ChannelParams, p_tx_dbm: float) -> float:
    """Closed-form coverage radius when both excess losses are zero."""
    d_max = SPEED_OF_LIGHT * 10.0 ** (cp.loss_threshold_db(p_tx_dbm) / 20.0) / (
        4.0 * math.pi * cp.carrier_hz
    )
    return math.sqrt(max(0.0, d_max * d_max - h * h))


def coverage_radius(
    h: float,
    cp: ChannelParams,
    p_tx_dbm: float,
    search_bound_m: float = 30_000.0,
    strict: bool = False,
) -> float:
    """Ground distance at which the mean path loss reaches the threshold.

    Solved by bisection to within ``RADIUS_TOL_M``. If the altitude alone
    already exceeds the loss budget the radius is 0, unless ``strict`` is set,
    in which case that is reported as an error.
    """
    threshold = cp.loss_threshold_db(p_tx_dbm)
    if not (math.isfinite(h) and h > 0 and math.isfinite(threshold)):
        raise DomainError(f"coverage_radius: bad altitude {h} or threshold {threshold}")

    probe = np.linspace(0.0, search_bound_m, MONOTONE_PROBE_POINTS)
    probe_loss = np.asarray(mean_path_loss(np.full_like(probe, h), probe, cp))
    steps = np.diff(probe_loss)
    if np.any(steps < -1e-9):
        k = int(np.argmin(steps))
        raise NumericalError(
            f"mean path loss not monotone in ground distance at h={h}: "
            f"L({probe[k]:.1f})={probe_loss[k]:.4f} > L({probe[k + 1]:.1f})={probe_loss[k + 1]:.4f}"
        )

    if probe_loss[0] > threshold:
        if strict:
            raise OutOfRangeError(
                f"altitude {h} m alone gives loss {probe_loss[0]:.2f} dB > threshold {threshold:.2f} dB"
            )
        return 0.0
    if probe_loss[-1] < threshold:
        raise OutOfRangeError(
            f"loss threshold {threshold:.2f} dB not reached within {search_bound_m} m"
        )

    lo, hi = 0.0, float(search_bound_m)
    for _ in range(RADIUS_MAX_ITER):
        if hi - lo < RADIUS_TOL_M:
            break
        mid = 0.5 * (lo + hi)
        if mean_path_loss(h, mid, cp) <= threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
