"""Topology state, edge operations and the four-term topology reward."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .channel import watts_to_dbm
from .errors import ArtifactIOError, ConfigError
from .scenario import Scenario

EDGE_OPS = ("add", "delete", "maintain")
DISCONNECTED_PENALTY = 100.0
OVERLAP_UNIT = 5.0


@dataclass(eq=False)
class TopologyGraph:
    """Undirected UAV-UAV adjacency.

    GU coverage is not stored here; it follows from geometry and the transmit
    powers, see :meth:`gu_cover`.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigError(f"adjacency must be square, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ConfigError("adjacency must be symmetric")
        if a.diagonal().any():
            raise ConfigError("adjacency must have an empty diagonal")
        self.adjacency = a

    @property
    def n_uavs(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def empty(cls, n: int) -> "TopologyGraph":
        return cls(np.zeros((n, n), dtype=bool))

    @classmethod
    def complete(cls, n: int) -> "TopologyGraph":
        return cls(~np.eye(n, dtype=bool))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "TopologyGraph":
        a = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if u == v:
                raise ConfigError(f"self-loop ({u}, {v})")
            if not (0 <= u < n and 0 <= v < n):
                raise ConfigError(f"edge ({u}, {v}) out of range for {n} UAVs")
            a[u, v] = a[v, u] = True
        return cls(a)

    @classmethod
    def from_edge_bits(cls, n: int, bits) -> "TopologyGraph":
        """Inverse of :meth:`edge_bits` (upper triangle, row-major)."""
        a = np.zeros((n, n), dtype=bool)
        iu = np.triu_indices(n, k=1)
        a[iu] = np.asarray(bits, dtype=bool)
        return cls(a | a.T)

    def edge_bits(self) -> np.ndarray:
        return self.adjacency[np.triu_indices(self.n_uavs, k=1)]

    def edges(self) -> list[tuple[int, int]]:
        us, vs = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(u), int(v)) for u, v in zip(us, vs)]

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adjacency, k=1).sum())

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def with_edge(self, u: int, v: int, present: bool = True) -> "TopologyGraph":
        a = self.adjacency.copy()
        a[u, v] = a[v, u] = present
        return TopologyGraph(a)

    def permuted(self, perm) -> "TopologyGraph":
        perm = np.asarray(perm)
        return TopologyGraph(self.adjacency[np.ix_(perm, perm)])

    def gu_cover(self, sc: Scenario, zeta: float = 1e-6) -> np.ndarray:
        return coverage_matrix(sc, transmit_powers(self, sc, zeta))

    def __eq__(self, other):
        return isinstance(other, TopologyGraph) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash((self.n_uavs, self.edge_bits().tobytes()))

    def __repr__(self):
        return f"TopologyGraph(n_uavs={self.n_uavs}, edges={self.edges()})"


@dataclass(frozen=True)
class EdgeOp:
    u: int
    v: int
    op: str = "add"

    def __post_init__(self):
        if self.op not in EDGE_OPS:
            raise ConfigError(f"unknown edge op {self.op!r}; expected one of {EDGE_OPS}")
        if self.u == self.v:
            raise ConfigError(f"self-loop edge op on UAV {self.u}")


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 1.0
    beta: float = 0.001
    gamma: float = 1.0
    delta: float = 0.02
    a: float = 1.0
    b: float = 1.0
    o: float = 1.0
    hover_base: float = 50.0
    altitude_coeff: float = 0.1
    link_power: float = 0.5
    flight_time: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value >= 0:
                raise ConfigError(f"RewardWeights.{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class RewardBreakdown:
    cov: float
    ener: float
    conn: float
    over: float
    total: float


def apply_edge_ops(g: TopologyGraph, ops: Iterable[EdgeOp]) -> TopologyGraph:
    a = g.adjacency.copy()
    n = g.n_uavs
    for e in ops:
        if e.u == e.v:
            raise ConfigError(f"self-loop edge op on UAV {e.u}")
        if not (0 <= e.u < n and 0 <= e.v < n):
            raise ConfigError(f"edge op ({e.u}, {e.v}) out of range for {n} UAVs")
        if e.op == "add":
            a[e.u, e.v] = a[e.v, e.u] = True
        elif e.op == "delete":
            a[e.u, e.v] = a[e.v, e.u] = False
    return TopologyGraph(a)


class UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))
        self.n_components = size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        self.n_components -= 1
        return True


def connected_components(g: TopologyGraph) -> UnionFind:
    uf = UnionFind(g.n_uavs)
    for u, v in g.edges():
        uf.union(u, v)
    return uf


def connected_component_count(g: TopologyGraph) -> int:
    return connected_components(g).n_components


def active_uavs(g: TopologyGraph) -> np.ndarray:
    """UAVs that hold at least one UAV-UAV link and therefore relay.

    A lone UAV (J = 1) always counts as active.
    """
    if g.n_uavs == 1:
        return np.ones(1, dtype=bool)
    return g.adjacency.any(axis=1)


def transmit_powers(g: TopologyGraph, sc: Scenario, zeta: float = 1e-6) -> np.ndarray:
    """Equilibrium power for relaying UAVs, zero for the rest (watts)."""
    powers = sc.equilibrium(zeta).powers_w
    return np.where(active_uavs(g), powers, 0.0)


def coverage_matrix(sc: Scenario, powers_w) -> np.ndarray:
    """``cover[j, i]`` is true when UAV j delivers at least P_min to GU i."""
    p_dbm = watts_to_dbm(np.asarray(powers_w, dtype=float))
    rx = p_dbm[:, None] - sc.path_loss_db
    return rx >= sc.channel.min_rx_power_dbm


def coverage_reward(g: TopologyGraph, sc: Scenario, cover: np.ndarray | None = None) -> float:
    if cover is None:
        cover = g.gu_cover(sc)
    return float(np.mean(np.any(cover, axis=0)))


def overlap_reward(g: TopologyGraph, sc: Scenario, cover: np.ndarray | None = None) -> float:
    if cover is None:
        cover = g.gu_cover(sc)
    m = np.sum(cover, axis=0)
    return float(np.sum(np.where(m >= 2, OVERLAP_UNIT * (m - 1), 0.0)))


def energy_reward(
    g: TopologyGraph, sc: Scenario, w: RewardWeights, powers_w: np.ndarray | None = None
) -> float:
    """Flight energy of every UAV, transmit energy, and per-link upkeep."""
    if powers_w is None:
        powers_w = transmit_powers(g, sc)
    h = sc.placement.uav_xyz[:, 2]
    fly = float(np.sum((w.hover_base + w.altitude_coeff * h) * w.flight_time))
    tra = float(np.sum(powers_w) * w.flight_time)
    cha = g.n_edges * 2.0 * w.link_power * w.flight_time
    return w.a * fly + w.b * tra + w.o * cha


def connectivity_reward(g: TopologyGraph) -> float:
    return 0.0 if connected_component_count(g) == 1 else DISCONNECTED_PENALTY


def total_reward(
    g: TopologyGraph, sc: Scenario, w: RewardWeights, zeta: float = 1e-6
) -> RewardBreakdown:
    powers = transmit_powers(g, sc, zeta)
    cover = coverage_matrix(sc, powers)
    cov = coverage_reward(g, sc, cover)
    ener = energy_reward(g, sc, w, powers)
    conn = connectivity_reward(g)
    over = overlap_reward(g, sc, cover)
    total = w.alpha * cov - w.beta * ener - w.gamma * conn - w.delta * over
    return RewardBreakdown(cov, ener, conn, over, total)


def dumps_edge_list(g: TopologyGraph) -> str:
    """Canonical JSON: ``{"n_uavs": J, "edges": [[u, v], ...]}`` with u < v, sorted."""
    return json.dumps({"n_uavs": g.n_uavs, "edges": [list(e) for e in g.edges()]}) + "\n"


def loads_edge_list(text: str) -> TopologyGraph:
    try:
        d = json.loads(text)
        return TopologyGraph.from_edges(int(d["n_uavs"]), [tuple(e) for e in d["edges"]])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"malformed edge list: {exc}") from exc


def save_edge_list(g: TopologyGraph, path) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(dumps_edge_list(g))
    except OSError as exc:
        raise ArtifactIOError(f"cannot write edge list to {path}: {exc}") from exc


def load_edge_list(path) -> TopologyGraph:
    try:
        with open(path) as fh:
            return loads_edge_list(fh.read())
    except OSError as exc:
        raise ArtifactIOError(f"cannot read edge list {path}: {exc}") from exc
