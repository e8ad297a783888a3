"""Policy optimisation for the diffusion topology generator, plus baselines.

Each iteration samples K reverse chains, scores the final graphs with the
topology reward (transmit powers come from the Stackelberg solve), normalises
the rewards within the batch, forms the eager policy gradient and takes one
plain ascent step ``theta <- theta + eta * g``. No clipping, no momentum.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffusion import (
    DiffusionSchedule,
    PolicyParams,
    Trajectory,
    _grad_clean_bits,
    _grad_step_bits,
    edge_model,
    init_params,
    sample_trajectory,
)
from .env import (
    RewardWeights,
    TopologyGraph,
    connected_component_count,
    connected_components,
    total_reward,
)
from .errors import ConfigError, IterationLimitError
from .scenario import Scenario

ESTIMATORS = ("epg", "reinforce")

# spawn keys that separate the independent random streams of one run
_STREAM_INIT, _STREAM_ITER, _STREAM_FINAL = 0, 1, 2


@dataclass
class TrainConfig:
    n_iters: int = 50
    n_trajectories: int = 8
    timestep_subset_size: int = 4
    learning_rate: float = 0.002
    seed: int = 0
    n_steps: int = 32
    beta_start: float = 0.01
    beta_end: float = 0.2
    zeta: float = 1e-6
    hidden: int = 32
    init_edge_prob: float = 0.25
    normalize: bool = True
    estimator: str = "epg"
    workers: int = 1
    record_wall_time: bool = False
    weights: RewardWeights = field(default_factory=RewardWeights)

    def __post_init__(self):
        if self.n_iters < 1:
            raise ConfigError("n_iters must be >= 1")
        if self.n_trajectories < 2:
            raise ConfigError("n_trajectories must be >= 2 (reward normalisation needs a std)")
        if not 1 <= self.timestep_subset_size <= self.n_steps:
            raise ConfigError(f"timestep_subset_size must lie in [1, {self.n_steps}]")
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be non-negative")
        if not self.zeta > 0:
            raise ConfigError("zeta must be positive")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def schedule(self) -> DiffusionSchedule:
        return DiffusionSchedule.linear(self.n_steps, self.beta_start, self.beta_end)


@dataclass
class TrainHistory:
    mean_reward: list[float] = field(default_factory=list)
    std_reward: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    connected_frac: list[float] = field(default_factory=list)
    mean_edges: list[float] = field(default_factory=list)
    params: PolicyParams | None = None

    def __len__(self):
        return len(self.mean_reward)

    def rows(self):
        for i in range(len(self)):
            yield (i, self.mean_reward[i], self.std_reward[i], self.grad_norm[i], self.wall_ms[i])


def normalize_rewards(rewards) -> np.ndarray:
    """Centre and divide by the Bessel-corrected std; an all-equal batch gives zeros."""
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise ConfigError("reward normalisation needs at least two rewards")
    centred = r - r.mean()
    centred -= centred.mean()  # second pass removes the rounding left by large offsets
    std = np.std(r, ddof=1)
    if std < 1e-12:
        return np.zeros_like(r)
    return centred / std


def epg_trajectory_grad(traj: Trajectory, p: PolicyParams, sc: Scenario) -> np.ndarray:
    """``(T / |T_k|) sum_{t in T_k} grad log p(S_0 | S_t)`` for one chain, reward excluded."""
    steps = np.asarray(traj.sampled_steps)
    if steps.size == 0:
        raise ConfigError("empty timestep subset")
    model = edge_model(sc)
    bits0 = traj.bits_at(0)
    acc = np.zeros_like(p.theta)
    for t in steps:
        acc += _grad_clean_bits(p, model, bits0, traj.bits_at(int(t)), int(t))
    return acc * (traj.n_steps / steps.size)


def reinforce_trajectory_grad(
    traj: Trajectory, p: PolicyParams, sc: Scenario, sch: DiffusionSchedule
) -> np.ndarray:
    """``sum_{t=1}^T grad log p(S_{t-1} | S_t)`` for one chain, reward excluded."""
    model = edge_model(sc)
    acc = np.zeros_like(p.theta)
    for t in range(1, traj.n_steps + 1):
        acc += _grad_step_bits(p, model, sch, traj.bits_at(t - 1), traj.bits_at(t), t)
    return acc


def _weighted_mean(trajs, per_traj):
    if not trajs:
        raise ConfigError("no trajectories")
    g = np.zeros_like(per_traj[0])
    for traj, gk in zip(trajs, per_traj):
        g += traj.reward * gk
    return g / len(trajs)


def eager_policy_gradient(trajs: list[Trajectory], p: PolicyParams, sc: Scenario) -> np.ndarray:
    """Average over chains of reward times the subsampled clean-graph score.

    ``traj.reward`` must already hold the (normalised) reward.
    """
    return _weighted_mean(trajs, [epg_trajectory_grad(tr, p, sc) for tr in trajs])


def reinforce_gradient(
    trajs: list[Trajectory], p: PolicyParams, sc: Scenario, sch: DiffusionSchedule
) -> np.ndarray:
    return _weighted_mean(trajs, [reinforce_trajectory_grad(tr, p, sc, sch) for tr in trajs])


def update_params(p: PolicyParams, g, eta: float) -> PolicyParams:
    g = np.asarray(g, dtype=float)
    if g.shape != p.theta.shape:
        raise ConfigError(f"gradient shape {g.shape} does not match theta {p.theta.shape}")
    return p.replace_theta(p.theta + eta * g)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def train_gdpo(cfg: TrainConfig, sc: Scenario, callback=None) -> TrainHistory:
    """Run the optimisation loop; deterministic for a given config and scenario.

    Chains get their own random streams keyed by (iteration, chain index), and
    the gradient is reduced in chain order, so the worker count never changes
    the numbers.
    """
    sch = cfg.schedule
    params = init_params(_rng(cfg.seed, _STREAM_INIT), cfg.n_steps, cfg.hidden, cfg.init_edge_prob)
    edge_model(sc)  # build the shared featurizer before any worker thread touches it
    K = cfg.n_trajectories
    hist = TrainHistory()
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    mapper = pool.map if pool else map

    try:
        for it in range(cfg.n_iters):
            start = time.perf_counter()
            current = params

            def sample(k, it=it, current=current):
                return sample_trajectory(
                    current, sc, sch, _rng(cfg.seed, _STREAM_ITER, it, k), cfg.timestep_subset_size
                )

            trajs = list(mapper(sample, range(K)))
            finals = [tr.final for tr in trajs]
            try:
                raw = np.array([total_reward(g, sc, cfg.weights, cfg.zeta).total for g in finals])
            except IterationLimitError as exc:
                raise IterationLimitError(f"iteration {it}: {exc}", exc.trace) from exc
            shaped = normalize_rewards(raw) if cfg.normalize else raw
            for tr, r in zip(trajs, shaped):
                tr.reward = float(r)

            if cfg.estimator == "epg":
                per = list(mapper(lambda tr: epg_trajectory_grad(tr, current, sc), trajs))
            else:
                per = list(mapper(lambda tr: reinforce_trajectory_grad(tr, current, sc, sch), trajs))
            for tr, gk in zip(trajs, per):
                tr.log_grad_accum = gk
            grad = _weighted_mean(trajs, per)
            params = update_params(current, grad, cfg.learning_rate)

            hist.mean_reward.append(float(raw.mean()))
            hist.std_reward.append(float(raw.std(ddof=1)))
            hist.grad_norm.append(float(np.linalg.norm(grad)))
            hist.wall_ms.append((time.perf_counter() - start) * 1e3 if cfg.record_wall_time else 0.0)
            hist.connected_frac.append(float(np.mean([connected_component_count(g) == 1 for g in finals])))
            hist.mean_edges.append(float(np.mean([g.n_edges for g in finals])))
            if callback is not None:
                callback(it, hist)
    finally:
        if pool is not None:
            pool.shutdown()
    hist.params = params
    return hist


def final_topology(cfg: TrainConfig, sc: Scenario, params: PolicyParams) -> TopologyGraph:
    """One graph drawn from the trained policy on its own random stream."""
    return sample_trajectory(params, sc, cfg.schedule, _rng(cfg.seed, _STREAM_FINAL)).final


def random_topology(sc: Scenario, edge_prob: float, rng: np.random.Generator) -> TopologyGraph:
    """Erdos-Renyi G(J, p) over the UAV pairs."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ConfigError(f"edge_prob must lie in [0, 1], got {edge_prob}")
    n = sc.n_uavs
    return TopologyGraph.from_edge_bits(n, rng.random(n * (n - 1) // 2) < edge_prob)


def _bridge_components(g: TopologyGraph, sc: Scenario) -> TopologyGraph:
    """Join all components with the shortest available links (Kruskal order)."""
    uf = connected_components(g)
    n = g.n_uavs
    d = sc.uav_distances
    pairs = sorted(
        ((d[u, v], u, v) for u in range(n) for v in range(u + 1, n) if not g.adjacency[u, v])
    )
    a = g.adjacency.copy()
    for _, u, v in pairs:
        if uf.n_components == 1:
            break
        if uf.union(u, v):
            a[u, v] = a[v, u] = True
    return TopologyGraph(a)


def greedy_topology(
    sc: Scenario,
    weights: RewardWeights | None = None,
    start: TopologyGraph | None = None,
    zeta: float = 1e-6,
) -> TopologyGraph:
    """Add the single best edge while any edge helps.

    The connectivity penalty only drops once the last component is joined, so
    single-edge moves can stall on a disconnected graph. When they do, the
    cheapest bridging of all components is tried as one move.
    """
    weights = weights or RewardWeights()
    g = start if start is not None else TopologyGraph.empty(sc.n_uavs)
    current = total_reward(g, sc, weights, zeta).total
    n = sc.n_uavs
    while True:
        best_gain, best = 0.0, None
        for u in range(n):
            for v in range(u + 1, n):
                if g.adjacency[u, v]:
                    continue
                gain = total_reward(g.with_edge(u, v), sc, weights, zeta).total - current
                if gain > best_gain:
                    best_gain, best = gain, (u, v)
        if best is not None:
            g = g.with_edge(*best)
            current = total_reward(g, sc, weights, zeta).total
            continue
        if connected_component_count(g) > 1:
            bridged = _bridge_components(g, sc)
            value = total_reward(bridged, sc, weights, zeta).total
            if value > current:
                g, current = bridged, value
                continue
        return g
