"""Problem instances: placements, channel, and per-UAV game parameters."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import ChannelParams, Placement, db_to_linear, dbm_to_watts, mean_path_loss
from .errors import ConfigError
from .game import AliceParams, GameEquilibrium, UavGameParams, solve_stackelberg


@dataclass
class ScenarioConfig:
    """Ranges scenarios are drawn from.

    Placement, power and detector values follow the published experiment
    table. ``phi_*``, ``mu``, ``psi``, ``omega`` and the reward bracket are
    not published and are free choices.
    """

    n_uavs: int = 9
    n_gus: int = 20
    area_m: float = 3000.0
    seed: int = 0
    alt_min_m: float = 100.0
    alt_max_m: float = 300.0
    p_tx_min_dbm: float = 10.0
    p_tx_max_dbm: float = 30.0
    willie_gain_db: float = 1.0
    noise_gain_db: float = 1.0
    detect_threshold: float = 0.6
    noise_sigma_w: float = 0.1
    gu_gain_db_min: float = 3.0
    gu_gain_db_max: float = 10.0
    phi_min: float = 0.5
    phi_max: float = 5.0
    mu: float = 1.0
    psi: float = 4.0
    omega: float = 1.0
    r_min: float = 0.1
    r_max: float = 20.0
    budget: float = 50.0

    def __post_init__(self):
        if self.n_uavs < 1 or self.n_gus < 1:
            raise ConfigError("n_uavs and n_gus must be >= 1")
        if not 0 < self.alt_min_m <= self.alt_max_m <= self.area_m:
            raise ConfigError("need 0 < alt_min_m <= alt_max_m <= area_m")
        if not self.p_tx_min_dbm < self.p_tx_max_dbm:
            raise ConfigError("p_tx_min_dbm must be below p_tx_max_dbm")
        if not 0 < self.phi_min <= self.phi_max:
            raise ConfigError("need 0 < phi_min <= phi_max")
        if not self.gu_gain_db_min <= self.gu_gain_db_max:
            raise ConfigError("gu_gain_db_min must not exceed gu_gain_db_max")

    def alice(self) -> AliceParams:
        return AliceParams(
            mu=self.mu,
            psi=self.psi,
            omega=self.omega,
            noise_gain=float(db_to_linear(self.noise_gain_db)),
            detect_threshold=self.detect_threshold,
            noise_sigma=self.noise_sigma_w,
            r_min=self.r_min,
            r_max=self.r_max,
            budget=self.budget,
        )


@dataclass(eq=False)
class Scenario:
    placement: Placement
    channel: ChannelParams
    uav_game: list[UavGameParams]
    alice: AliceParams
    gu_gain_db: np.ndarray  # carried for completeness; no equation uses it
    seed: int = 0
    _equilibria: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.gu_gain_db = np.asarray(self.gu_gain_db, dtype=float)
        if len(self.uav_game) != self.placement.n_uavs:
            raise ConfigError(
                f"{len(self.uav_game)} game parameter sets for {self.placement.n_uavs} UAVs"
            )
        if len(self.gu_gain_db) != self.placement.n_gus:
            raise ConfigError("gu_gain_db length must match the GU count")

    @property
    def n_uavs(self) -> int:
        return self.placement.n_uavs

    @property
    def n_gus(self) -> int:
        return self.placement.n_gus

    @cached_property
    def path_loss_db(self) -> np.ndarray:
        """Mean path loss for every UAV-GU pair, shape (J, I)."""
        s = self.placement.ground_distances()
        h = np.broadcast_to(self.placement.uav_xyz[:, 2:3], s.shape)
        return np.asarray(mean_path_loss(h, s, self.channel))

    @cached_property
    def uav_distances(self) -> np.ndarray:
        xyz = self.placement.uav_xyz
        return np.linalg.norm(xyz[:, None, :] - xyz[None, :, :], axis=-1)

    def equilibrium(self, zeta: float = 1e-6) -> GameEquilibrium:
        """Stackelberg solve over all UAVs, memoised per ``zeta``."""
        if zeta not in self._equilibria:
            self._equilibria[zeta] = solve_stackelberg(self.uav_game, self.alice, zeta)
        return self._equilibria[zeta]

    def permuted(self, perm) -> "Scenario":
        perm = list(perm)
        pl = self.placement
        return Scenario(
            Placement(pl.gu_xy, pl.uav_xyz[perm], pl.area_bound_m),
            self.channel,
            [self.uav_game[j] for j in perm],
            self.alice,
            self.gu_gain_db,
            self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "area_bound_m": self.placement.area_bound_m,
            "gu_xy": self.placement.gu_xy.tolist(),
            "uav_xyz": self.placement.uav_xyz.tolist(),
            "gu_gain_db": self.gu_gain_db.tolist(),
            "channel": dataclasses.asdict(self.channel),
            "alice": dataclasses.asdict(self.alice),
            "uav_game": [dataclasses.asdict(u) for u in self.uav_game],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            Placement(np.array(d["gu_xy"]), np.array(d["uav_xyz"]), d["area_bound_m"]),
            ChannelParams(**d["channel"]),
            [UavGameParams(**u) for u in d["uav_game"]],
            AliceParams(**d["alice"]),
            np.array(d["gu_gain_db"]),
            d.get("seed", 0),
        )


def generate_scenario(
    seed: int = 0,
    n_uavs: int | None = None,
    n_gus: int | None = None,
    area_m: float | None = None,
    cfg: ScenarioConfig | None = None,
    channel: ChannelParams | None = None,
) -> Scenario:
    """Draw a scenario; explicit arguments override the matching ``cfg`` fields."""
    cfg = cfg or ScenarioConfig()
    overrides = {
        k: v for k, v in (("n_uavs", n_uavs), ("n_gus", n_gus), ("area_m", area_m)) if v is not None
    }
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    channel = channel or ChannelParams()
    rng = np.random.default_rng(seed)

    gu_xy = rng.uniform(0.0, cfg.area_m, size=(cfg.n_gus, 2))
    uav_xy = rng.uniform(0.0, cfg.area_m, size=(cfg.n_uavs, 2))
    uav_h = rng.uniform(cfg.alt_min_m, cfg.alt_max_m, size=cfg.n_uavs)
    phis = rng.uniform(cfg.phi_min, cfg.phi_max, size=cfg.n_uavs)
    gu_gain = rng.uniform(cfg.gu_gain_db_min, cfg.gu_gain_db_max, size=cfg.n_gus)

    p_lo = float(dbm_to_watts(cfg.p_tx_min_dbm))
    p_hi = float(dbm_to_watts(cfg.p_tx_max_dbm))
    g = float(db_to_linear(cfg.willie_gain_db))
    ups = [UavGameParams(float(phi), g, p_lo, p_hi) for phi in phis]
    return Scenario(
        Placement(gu_xy, np.column_stack([uav_xy, uav_h]), cfg.area_m),
        channel,
        ups,
        cfg.alice(),
        gu_gain,
        seed,
    )
