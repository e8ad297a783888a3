"""Alice-UAV Stackelberg game under an energy-detecting warden.

Alice (leader) posts a unit reward ``r`` per UAV; each UAV (follower) answers
with the transmit power that maximises ``r ln(1 + P) - phi P`` over its power
box. The warden's detection probability enters Alice's utility only.

Everything here is in linear units: watts, linear gains.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .errors import ConfigError, InfeasibleError, IterationLimitError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
FIXED_POINT_CAP = 100
SCAN_POINTS = 64


@dataclass(frozen=True)
class UavGameParams:
    power_cost_coeff: float
    willie_gain: float
    p_min_w: float
    p_max_w: float

    def __post_init__(self):
        if not (self.power_cost_coeff > 0 and self.willie_gain > 0):
            raise ConfigError("power_cost_coeff and willie_gain must be positive")
        if not 0 < self.p_min_w < self.p_max_w:
            raise ConfigError(f"need 0 < p_min_w < p_max_w, got {self.p_min_w}, {self.p_max_w}")


@dataclass(frozen=True)
class AliceParams:
    mu: float = 1.0
    psi: float = 4.0
    omega: float = 1.0
    noise_gain: float = 10.0 ** 0.1
    detect_threshold: float = 0.6
    noise_sigma: float = 0.1
    r_min: float = 0.1
    r_max: float = 20.0
    budget: float = 50.0

    def __post_init__(self):
        if not (self.mu > 0 and self.psi > 0 and self.omega >= 0):
            raise ConfigError("need mu > 0, psi > 0, omega >= 0")
        if not (self.noise_sigma > 0 and self.noise_gain > 0):
            raise ConfigError("noise_sigma and noise_gain must be positive")
        if not 0 < self.r_min < self.r_max:
            raise ConfigError(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")
        if not self.budget > 0:
            raise ConfigError("budget must be positive")


@dataclass
class GameEquilibrium:
    """Per-UAV equilibrium quantities plus the chosen combination.

    Vectors are indexed by UAV over the full list handed to the solver;
    ``combination`` says which of them Alice actually hires.
    ``reward_rate`` is the mean of ``reward_rates`` over the combination.
    """

    powers_w: np.ndarray
    reward_rates: np.ndarray
    reward_rate: float
    uav_utilities: np.ndarray
    alice_utilities: np.ndarray
    detect_probs: np.ndarray
    payments: np.ndarray
    combination: tuple[int, ...]
    combination_value: float
    iterations: list[int] = field(default_factory=list)

    @property
    def total_payment(self) -> float:
        return float(sum(self.payments[j] for j in self.combination))

    def to_dict(self) -> dict:
        return {
            "combination": list(self.combination),
            "combination_value": self.combination_value,
            "reward_rate": self.reward_rate,
            "total_payment": self.total_payment,
            "uavs": [
                {
                    "index": j,
                    "selected": j in self.combination,
                    "power_w": float(self.powers_w[j]),
                    "reward_rate": float(self.reward_rates[j]),
                    "uav_utility": float(self.uav_utilities[j]),
                    "alice_utility": float(self.alice_utilities[j]),
                    "detect_prob": float(self.detect_probs[j]),
                    "payment": float(self.payments[j]),
                }
                for j in range(len(self.powers_w))
            ],
        }


def q_function(x):
    """Standard normal upper tail."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))[()]


def detection_probability(p_tx_w, up: UavGameParams, ap: AliceParams):
    z = ap.detect_threshold - np.asarray(p_tx_w, dtype=float) * up.willie_gain**2
    return q_function(z / ap.noise_sigma)


def payment(p_tx_w, r):
    return r * np.log1p(p_tx_w)


def uav_utility(p_tx_w, r, up: UavGameParams):
    return r * np.log1p(p_tx_w) - up.power_cost_coeff * p_tx_w


def uav_utility_grad(p_tx_w, r, up: UavGameParams):
    return r / (1.0 + p_tx_w) - up.power_cost_coeff


def best_response_power(r, up: UavGameParams):
    # U is strictly concave in P, so clamping the stationary point is optimal
    return np.clip(np.asarray(r, dtype=float) / up.power_cost_coeff - 1.0, up.p_min_w, up.p_max_w)[()]


def alice_utility(p_tx_w, r, up: UavGameParams, ap: AliceParams):
    throughput = ap.psi * np.log2(1.0 + p_tx_w * up.willie_gain / ap.noise_gain)
    exposure = ap.omega * detection_probability(p_tx_w, up, ap)
    return ap.mu * (throughput - exposure - payment(p_tx_w, r))


def leader_objective(r, up: UavGameParams, ap: AliceParams):
    """Alice's utility when the UAV best-responds to ``r``."""
    return alice_utility(best_response_power(r, up), r, up, ap)


def reward_interval(up: UavGameParams, ap: AliceParams) -> tuple[float, float]:
    # below this rate the detection term breaks concavity of Alice's utility
    concave_from = up.power_cost_coeff * (ap.detect_threshold / up.willie_gain**2 + 1.0)
    lo = max(ap.r_min, concave_from)
    if lo > ap.r_max:
        raise ConfigError(
            f"empty reward interval: concavity needs r >= phi*(eps/g^2 + 1) = {concave_from:.6g} "
            f"but r_max = {ap.r_max:.6g}"
        )
    return lo, ap.r_max


def golden_section_max(f, a: float, b: float, tol: float) -> float:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_reward(up: UavGameParams, ap: AliceParams, tol: float = 1e-9) -> float:
    """Maximise the leader objective over the concavity interval.

    The objective need not be unimodal (the detection term is convex in P
    once Z < 0), so a coarse scan finds every local peak and each one gets
    its own golden-section refinement. The power-clamp kinks are scored as
    candidates too.
    """
    lo, hi = reward_interval(up, ap)
    if hi - lo <= tol:
        return lo

    def f(r):
        return float(leader_objective(r, up, ap))

    grid = np.linspace(lo, hi, SCAN_POINTS)
    values = leader_objective(grid, up, ap)
    padded = np.concatenate(([-np.inf], values, [-np.inf]))
    peaks = np.flatnonzero((values >= padded[:-2]) & (values >= padded[2:]))
    candidates = [lo, hi]
    for k in peaks:
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, SCAN_POINTS - 1)]
        candidates.append(golden_section_max(f, a, b, tol))
    for p_edge in (up.p_min_w, up.p_max_w):
        kink = up.power_cost_coeff * (1.0 + p_edge)
        if lo < kink < hi:
            candidates.append(kink)
    return max(candidates, key=f)


def _solve_one(up: UavGameParams, ap: AliceParams, zeta: float, r0: float, tol: float):
    trace = [r0]
    r_prev = r0
    for it in range(1, FIXED_POINT_CAP + 1):
        r_new = optimal_reward(up, ap, tol)
        trace.append(r_new)
        if abs(r_new - r_prev) < zeta:
            return r_new, it
        r_prev = r_new
    raise IterationLimitError(
        f"Stackelberg iteration did not settle within {FIXED_POINT_CAP} rounds", trace
    )


def solve_stackelberg(
    ups: list[UavGameParams], ap: AliceParams, zeta: float = 1e-6, r0: float | None = None
) -> GameEquilibrium:
    """Per-UAV leader/follower fixed point, starting every UAV from ``r0``."""
    if not zeta > 0:
        raise ConfigError("zeta must be positive")
    if r0 is None:
        r0 = ap.r_min
    if not ap.r_min <= r0 <= ap.r_max:
        raise ConfigError(f"r0={r0} outside [{ap.r_min}, {ap.r_max}]")
    tol = min(1e-9, zeta * 1e-3)

    n = len(ups)
    rates = np.empty(n)
    iters = []
    for j, up in enumerate(ups):
        rates[j], it = _solve_one(up, ap, zeta, r0, tol)
        iters.append(it)
    return _assemble(ups, ap, rates, tuple(range(n)), iters)


def _assemble(ups, ap, rates, combination, iters) -> GameEquilibrium:
    powers = np.array([best_response_power(r, up) for r, up in zip(rates, ups)])
    u = np.array([uav_utility(p, r, up) for p, r, up in zip(powers, rates, ups)])
    v = np.array([alice_utility(p, r, up, ap) for p, r, up in zip(powers, rates, ups)])
    det = np.array([detection_probability(p, up, ap) for p, up in zip(powers, ups)])
    pay = np.array([payment(p, r) for p, r in zip(powers, rates)])
    value = float(sum(v[j] for j in combination))
    mean_rate = float(np.mean(rates[list(combination)])) if combination else float("nan")
    return GameEquilibrium(
        powers_w=powers,
        reward_rates=rates,
        reward_rate=mean_rate,
        uav_utilities=u,
        alice_utilities=v,
        detect_probs=det,
        payments=pay,
        combination=tuple(combination),
        combination_value=value,
        iterations=list(iters),
    )


def equilibrium_slack(
    up: UavGameParams, ap: AliceParams, p_star: float, r_star: float, n_grid: int = 1000
) -> tuple[float, float]:
    """Largest utility gain from a unilateral deviation, per player.

    The UAV deviates in power on a grid over its box with ``r_star`` fixed.
    Alice deviates in rate on a grid over her interval, and the UAV
    re-optimises, which is what a leader's deviation means.
    """
    p_grid = np.linspace(up.p_min_w, up.p_max_w, n_grid)
    follower_gain = float(np.max(uav_utility(p_grid, r_star, up)) - uav_utility(p_star, r_star, up))
    lo, hi = reward_interval(up, ap)
    r_grid = np.linspace(lo, hi, n_grid)
    leader_gain = float(
        np.max(leader_objective(r_grid, up, ap)) - alice_utility(p_star, r_star, up, ap)
    )
    return follower_gain, leader_gain


def select_combination(
    ups: list[UavGameParams],
    ap: AliceParams,
    zeta: float = 1e-6,
    max_size: int | None = None,
    exact_size: int | None = None,
) -> GameEquilibrium:
    """Best budget-feasible UAV subset by total Alice utility.

    Subsets over budget are dropped. Ties go to the smaller subset, then to
    the lexicographically first one. ``exact_size`` restricts the search to
    subsets of one size.
    """
    n = len(ups)
    if n > 12:
        raise ConfigError(f"exhaustive subset search is limited to 12 UAVs, got {n}")
    if max_size is None:
        max_size = n
    if not 1 <= max_size <= n:
        raise ConfigError(f"max_size must lie in [1, {n}], got {max_size}")
    sizes = [exact_size] if exact_size is not None else range(1, max_size + 1)
    if exact_size is not None and not 1 <= exact_size <= n:
        raise ConfigError(f"exact_size must lie in [1, {n}], got {exact_size}")

    # UAVs do not interact, so one solve per UAV serves every subset
    full = solve_stackelberg(ups, ap, zeta)
    v, pay = full.alice_utilities, full.payments

    best, best_value = None, -math.inf
    for size in sizes:
        for combo in itertools.combinations(range(n), size):
            if sum(pay[j] for j in combo) > ap.budget:
                continue
            value = sum(v[j] for j in combo)
            if value > best_value:
                best, best_value = combo, value
    if best is None:
        raise InfeasibleError(
            f"no UAV subset of size {list(sizes)} fits the budget {ap.budget}"
        )
    return _assemble(ups, ap, full.reward_rates, best, full.iterations)
