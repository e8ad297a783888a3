"""Edge-wise discrete diffusion over UAV adjacency matrices.

Forward process: every unordered UAV pair flips its bit independently with
probability ``beta_t`` at step t. After t steps the pair differs from the
clean graph with probability ``qbar_t = (1 - prod_{s<=t}(1 - 2 beta_s)) / 2``.

Reverse process: a small perceptron looks at the noisy graph ``S_t`` and
predicts, per pair, the probability that the edge is present in ``S_0``.
The step ``S_t -> S_{t-1}`` then draws each bit from the forward posterior
``q(S_{t-1} | S_t, S_0)`` averaged over that prediction.

Edge features, in this order (``IN_DIM`` = 7)::

    0  edge bit in S_t
    1  t / T
    2  UAV-UAV distance / area side
    3  min(deg u, deg v) / J
    4  max(deg u, deg v) / J
    5  min(cov u, cov v)      cov = fraction of GUs the UAV can cover
    6  max(cov u, cov v)

Parameter vector layout: ``W1`` (hidden x IN_DIM, row-major), ``b1``
(hidden), ``w2`` (hidden), ``b2`` (1).
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np

from .env import TopologyGraph, coverage_matrix
from .errors import ArtifactIOError, ConfigError
from .scenario import Scenario

IN_DIM = 7
DEFAULT_HIDDEN = 32
CHECKPOINT_MAGIC = "uavtopo-policy"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class DiffusionSchedule:
    flip_probs: tuple[float, ...]

    def __post_init__(self):
        betas = tuple(float(b) for b in self.flip_probs)
        object.__setattr__(self, "flip_probs", betas)
        if not betas:
            raise ConfigError("diffusion schedule needs at least one step")
        if not all(0.0 < b < 0.5 for b in betas):
            raise ConfigError("flip probabilities must lie in (0, 0.5)")

    @classmethod
    def linear(cls, n_steps: int = 32, beta_start: float = 0.01, beta_end: float = 0.2):
        return cls(tuple(np.linspace(beta_start, beta_end, n_steps)))

    @property
    def n_steps(self) -> int:
        return len(self.flip_probs)

    def beta(self, t: int) -> float:
        return self.flip_probs[t - 1]

    def cumulative_flip(self, t: int) -> float:
        """Probability that a bit differs from the clean graph after t steps."""
        if t == 0:
            return 0.0
        stay = np.prod(1.0 - 2.0 * np.asarray(self.flip_probs[:t]))
        return 0.5 * (1.0 - stay)


@dataclass
class PolicyParams:
    theta: np.ndarray
    hidden: int = DEFAULT_HIDDEN
    n_steps: int = 32
    in_dim: int = IN_DIM

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.in_dim != IN_DIM:
            raise ConfigError(f"denoiser expects {IN_DIM} input features, got in_dim={self.in_dim}")
        if self.theta.shape != (n_params(self.hidden, self.in_dim),):
            raise ConfigError(
                f"theta has shape {self.theta.shape}, expected ({n_params(self.hidden, self.in_dim)},)"
            )
        if not np.all(np.isfinite(self.theta)):
            raise ConfigError("theta has non-finite entries")

    def unpack(self):
        h, d = self.hidden, self.in_dim
        th = self.theta
        w1 = th[: h * d].reshape(h, d)
        b1 = th[h * d : h * d + h]
        w2 = th[h * d + h : h * d + 2 * h]
        b2 = th[-1]
        return w1, b1, w2, b2

    def replace_theta(self, theta) -> "PolicyParams":
        return PolicyParams(theta, self.hidden, self.n_steps, self.in_dim)


def n_params(hidden: int = DEFAULT_HIDDEN, in_dim: int = IN_DIM) -> int:
    return hidden * in_dim + 2 * hidden + 1


def init_params(
    rng: np.random.Generator,
    n_steps: int = 32,
    hidden: int = DEFAULT_HIDDEN,
    init_edge_prob: float = 0.5,
    out_scale: float = 0.1,
) -> PolicyParams:
    """Random first layer, small output layer, output bias at ``logit(init_edge_prob)``."""
    if not 0.0 < init_edge_prob < 1.0:
        raise ConfigError("init_edge_prob must lie in (0, 1)")
    w1 = rng.normal(0.0, 1.0 / np.sqrt(IN_DIM), size=(hidden, IN_DIM))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, out_scale / np.sqrt(hidden), size=hidden)
    b2 = np.log(init_edge_prob / (1.0 - init_edge_prob))
    return PolicyParams(np.concatenate([w1.ravel(), b1, w2, [b2]]), hidden, n_steps)


def zero_params(n_steps: int = 32, hidden: int = DEFAULT_HIDDEN) -> PolicyParams:
    return PolicyParams(np.zeros(n_params(hidden)), hidden, n_steps)


class EdgeModel:
    """Per-scenario featurizer plus the perceptron forward/backward passes."""

    def __init__(self, sc: Scenario):
        n = sc.n_uavs
        self.n = n
        self.iu, self.iv = np.triu_indices(n, k=1)
        dist = sc.uav_distances[self.iu, self.iv] / sc.placement.area_bound_m
        cov = coverage_matrix(sc, sc.equilibrium().powers_w).mean(axis=1)
        cu, cv = cov[self.iu], cov[self.iv]
        self.static = np.column_stack([dist, np.minimum(cu, cv), np.maximum(cu, cv)])

    @property
    def n_pairs(self) -> int:
        return len(self.iu)

    def features(self, bits: np.ndarray, t: int, n_steps: int) -> np.ndarray:
        b = bits.astype(float)
        deg = np.bincount(self.iu, b, self.n) + np.bincount(self.iv, b, self.n)
        du, dv = deg[self.iu], deg[self.iv]
        x = np.empty((self.n_pairs, IN_DIM))
        x[:, 0] = b
        x[:, 1] = t / n_steps
        x[:, 2] = self.static[:, 0]
        x[:, 3] = np.minimum(du, dv) / self.n
        x[:, 4] = np.maximum(du, dv) / self.n
        x[:, 5:7] = self.static[:, 1:3]
        return x

    @staticmethod
    def forward(p: PolicyParams, x: np.ndarray):
        w1, b1, w2, b2 = p.unpack()
        hid = np.tanh(x @ w1.T + b1)
        return hid @ w2 + b2, hid

    @staticmethod
    def backward(p: PolicyParams, x: np.ndarray, hid: np.ndarray, coeff: np.ndarray) -> np.ndarray:
        """Gradient of ``sum_e coeff_e * logit_e`` with respect to theta."""
        _, _, w2, _ = p.unpack()
        d_pre = np.outer(coeff, w2) * (1.0 - hid * hid)
        return np.concatenate([(d_pre.T @ x).ravel(), d_pre.sum(axis=0), hid.T @ coeff, [coeff.sum()]])

    def logits(self, p: PolicyParams, bits: np.ndarray, t: int):
        x = self.features(bits, t, p.n_steps)
        logit, hid = self.forward(p, x)
        return logit, x, hid


_models: "weakref.WeakKeyDictionary[Scenario, EdgeModel]" = weakref.WeakKeyDictionary()


def edge_model(sc: Scenario) -> EdgeModel:
    model = _models.get(sc)
    if model is None:
        model = _models[sc] = EdgeModel(sc)
    return model


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check(p: PolicyParams, sc: Scenario, *graphs: TopologyGraph):
    for g in graphs:
        if g.n_uavs != sc.n_uavs:
            raise ConfigError(f"graph has {g.n_uavs} UAVs, scenario has {sc.n_uavs}")


def _check_step(p: PolicyParams, t: int):
    if not 1 <= t <= p.n_steps:
        raise ConfigError(f"timestep {t} outside [1, {p.n_steps}]")


def forward_noise(
    g0: TopologyGraph, t: int, sch: DiffusionSchedule, rng: np.random.Generator
) -> TopologyGraph:
    if not 1 <= t <= sch.n_steps:
        raise ConfigError(f"timestep {t} outside [1, {sch.n_steps}]")
    bits = g0.edge_bits()
    flips = rng.random(bits.shape) < sch.cumulative_flip(t)
    return TopologyGraph.from_edge_bits(g0.n_uavs, bits ^ flips)


def denoise_predict(p: PolicyParams, gt: TopologyGraph, t: int, sc: Scenario) -> np.ndarray:
    """Per-pair probability that the edge is present in the clean graph.

    Returned as a symmetric (J, J) matrix with zero diagonal.
    """
    _check(p, sc, gt)
    _check_step(p, t)
    model = edge_model(sc)
    logit, _, _ = model.logits(p, gt.edge_bits(), t)
    out = np.zeros((sc.n_uavs, sc.n_uavs))
    out[model.iu, model.iv] = _sigmoid(logit)
    return out + out.T


def _bernoulli_loglik(bits, logit):
    return np.where(bits, logit, 0.0) - np.logaddexp(0.0, logit)


def log_prob_clean_given_noisy(
    p: PolicyParams, s0: TopologyGraph, st: TopologyGraph, t: int, sc: Scenario
) -> float:
    _check(p, sc, s0, st)
    _check_step(p, t)
    logit, _, _ = edge_model(sc).logits(p, st.edge_bits(), t)
    return float(np.sum(_bernoulli_loglik(s0.edge_bits(), logit)))


def _grad_clean_bits(p: PolicyParams, model: EdgeModel, bits0, bits_t, t: int) -> np.ndarray:
    logit, x, hid = model.logits(p, bits_t, t)
    return model.backward(p, x, hid, bits0.astype(float) - _sigmoid(logit))


def grad_log_prob(
    p: PolicyParams, s0: TopologyGraph, st: TopologyGraph, t: int, sc: Scenario
) -> np.ndarray:
    """Exact gradient of :func:`log_prob_clean_given_noisy` in theta."""
    _check(p, sc, s0, st)
    _check_step(p, t)
    return _grad_clean_bits(p, edge_model(sc), s0.edge_bits(), st.edge_bits(), t)


def posterior_given_clean(sch: DiffusionSchedule, t: int, bits_t) -> tuple[np.ndarray, np.ndarray]:
    """``P(bit_{t-1} = 1 | bit_t, clean bit = c)`` for c = 1 and c = 0."""
    beta = sch.beta(t)
    qbar = sch.cumulative_flip(t - 1)
    y = np.asarray(bits_t, dtype=bool)
    lik1 = np.where(y, 1.0 - beta, beta)  # q(bit_t | bit_{t-1} = 1)
    lik0 = np.where(y, beta, 1.0 - beta)
    a1 = lik1 * (1.0 - qbar) / (lik1 * (1.0 - qbar) + lik0 * qbar)
    a0 = lik1 * qbar / (lik1 * qbar + lik0 * (1.0 - qbar))
    return a1, a0


def _step_prob(p, model, sch, bits_t, t):
    logit, x, hid = model.logits(p, bits_t, t)
    clean = _sigmoid(logit)
    a1, a0 = posterior_given_clean(sch, t, bits_t)
    return clean * a1 + (1.0 - clean) * a0, clean, a1, a0, x, hid


def log_prob_step(
    p: PolicyParams, s_prev: TopologyGraph, st: TopologyGraph, t: int, sc: Scenario,
    sch: DiffusionSchedule,
) -> float:
    """Log-density of one reverse transition ``S_t -> S_{t-1}``."""
    _check(p, sc, s_prev, st)
    _check_step(p, t)
    prob1, *_ = _step_prob(p, edge_model(sc), sch, st.edge_bits(), t)
    x_prev = s_prev.edge_bits()
    return float(np.sum(np.log(np.where(x_prev, prob1, 1.0 - prob1))))


def _grad_step_bits(p, model, sch, bits_prev, bits_t, t) -> np.ndarray:
    prob1, clean, a1, a0, x, hid = _step_prob(p, model, sch, bits_t, t)
    d_clean = np.where(bits_prev, (a1 - a0) / prob1, -(a1 - a0) / (1.0 - prob1))
    return model.backward(p, x, hid, d_clean * clean * (1.0 - clean))


def grad_log_prob_step(
    p: PolicyParams, s_prev: TopologyGraph, st: TopologyGraph, t: int, sc: Scenario,
    sch: DiffusionSchedule,
) -> np.ndarray:
    _check(p, sc, s_prev, st)
    _check_step(p, t)
    return _grad_step_bits(p, edge_model(sc), sch, s_prev.edge_bits(), st.edge_bits(), t)


@dataclass
class Trajectory:
    """One reverse chain. ``edge_bits[0]`` is S_T, ``edge_bits[-1]`` is S_0."""

    n_uavs: int
    edge_bits: np.ndarray
    sampled_steps: np.ndarray
    reward: float = float("nan")
    log_grad_accum: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.edge_bits) - 1

    @property
    def states(self) -> list[TopologyGraph]:
        return [TopologyGraph.from_edge_bits(self.n_uavs, b) for b in self.edge_bits]

    def bits_at(self, t: int) -> np.ndarray:
        return self.edge_bits[self.n_steps - t]

    def state_at(self, t: int) -> TopologyGraph:
        return TopologyGraph.from_edge_bits(self.n_uavs, self.bits_at(t))

    @property
    def final(self) -> TopologyGraph:
        return self.state_at(0)


def sample_steps(rng: np.random.Generator, n_steps: int, subset_size: int) -> np.ndarray:
    if not 1 <= subset_size <= n_steps:
        raise ConfigError(f"timestep subset size {subset_size} outside [1, {n_steps}]")
    return np.sort(rng.choice(np.arange(1, n_steps + 1), size=subset_size, replace=False))


def sample_trajectory(
    p: PolicyParams,
    sc: Scenario,
    sch: DiffusionSchedule,
    rng: np.random.Generator,
    subset_size: int | None = None,
) -> Trajectory:
    """Run the reverse chain from uniform noise; optionally draw a timestep subset."""
    if p.n_steps != sch.n_steps:
        raise ConfigError(f"policy built for T={p.n_steps}, schedule has T={sch.n_steps}")
    model = edge_model(sc)
    T = sch.n_steps
    bits = np.empty((T + 1, model.n_pairs), dtype=bool)
    bits[0] = rng.random(model.n_pairs) < 0.5
    for t in range(T, 0, -1):
        prob1, *_ = _step_prob(p, model, sch, bits[T - t], t)
        bits[T - t + 1] = rng.random(model.n_pairs) < prob1
    steps = sample_steps(rng, T, subset_size if subset_size is not None else T)
    return Trajectory(sc.n_uavs, bits, steps)


def save_params(p: PolicyParams, path) -> None:
    """Text checkpoint: magic/version line, header fields, then one value per line."""
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"in_dim {p.in_dim}",
        f"hidden {p.hidden}",
        f"n_steps {p.n_steps}",
        f"n_params {len(p.theta)}",
        *(repr(float(v)) for v in p.theta),
    ]
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write checkpoint {path}: {exc}") from exc


def load_params(path) -> PolicyParams:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        magic, version = lines[0].split()
        if magic != CHECKPOINT_MAGIC or int(version) != CHECKPOINT_VERSION:
            raise ConfigError(f"{path}: not a version-{CHECKPOINT_VERSION} policy checkpoint")
        header = {}
        for i, key in enumerate(("in_dim", "hidden", "n_steps", "n_params"), start=1):
            name, value = lines[i].split()
            if name != key:
                raise ConfigError(f"{path}:{i + 1}: expected {key!r}, found {name!r}")
            header[key] = int(value)
        theta = np.array([float(v) for v in lines[5 : 5 + header["n_params"]]])
        if len(theta) != header["n_params"]:
            raise ConfigError(f"{path}: truncated parameter block")
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed checkpoint ({exc})") from exc
    return PolicyParams(theta, header["hidden"], header["n_steps"], header["in_dim"])
