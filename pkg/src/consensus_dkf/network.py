"""Sensor network topologies and doubly stochastic consensus weights."""

import json
import logging
import threading
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import networkx as nx
import numpy as np

from .errors import DisconnectedNetworkError
from .models import NetworkFile, NetworkSpec
from .utils import Array, as_matrix

logger = logging.getLogger(__name__)

type TopologyKind = Literal["line", "circle", "small_world", "complete"]
type Edge = tuple[int, int]

STOCHASTIC_TOL = 1e-12
MAX_PLACEMENT_RETRIES = 100
SMALL_WORLD_DEGREE = 4
SMALL_WORLD_REWIRE = 0.2


def _normalize_edges(edges: Iterable[Iterable[int]]) -> frozenset[Edge]:
    result: set[Edge] = set()
    for edge in edges:
        i, j = (int(v) for v in edge)
        if i == j:
            continue
        result.add((min(i, j), max(i, j)))
    return frozenset(result)


def metropolis_weights(edges: Iterable[Iterable[int]], node_count: int) -> Array:
    """
    Build Metropolis weights for an undirected graph.

    Each edge gets ``1 / (1 + max(deg_i, deg_j))`` and the diagonal takes the
    remainder of its row.
    """
    pairs = _normalize_edges(edges)
    degree = np.zeros(node_count, dtype=np.int64)
    for i, j in pairs:
        degree[i] += 1
        degree[j] += 1
    weights = np.zeros((node_count, node_count))
    for i, j in pairs:
        weights[i, j] = weights[j, i] = 1.0 / (1.0 + max(degree[i], degree[j]))
    np.fill_diagonal(weights, 1.0 - weights.sum(axis=1))
    return weights


def blend_weights(weights: Array, eta: float) -> Array:
    """Return ``eta * I + (1 - eta) * L``, checked to stay doubly stochastic."""
    if not 0.0 <= eta < 1.0:
        msg = f"eta must lie in [0, 1), got {eta}"
        raise ValueError(msg)
    blended = eta * np.eye(weights.shape[0]) + (1.0 - eta) * weights
    _check_doubly_stochastic(blended)
    return blended


def _check_doubly_stochastic(weights: Array) -> None:
    ones = np.ones(weights.shape[0])
    if np.any(weights < 0.0):
        msg = "consensus weights must be nonnegative"
        raise ValueError(msg)
    if np.max(np.abs(weights - weights.T)) > STOCHASTIC_TOL:
        msg = "consensus weights must be symmetric"
        raise ValueError(msg)
    if (
        np.max(np.abs(weights @ ones - ones)) > STOCHASTIC_TOL
        or np.max(np.abs(ones @ weights - ones)) > STOCHASTIC_TOL
    ):
        msg = "consensus weights must be doubly stochastic"
        raise ValueError(msg)


@dataclass(frozen=True)
class SpectralData:
    """Spectral summary of a consensus weight matrix."""

    lambda2: float
    diameter: int | None
    connected: bool


@dataclass(frozen=True, eq=False)
class ConsensusNetwork:
    """
    An undirected network with a symmetric doubly stochastic weight matrix.

    Nodes are 0-based. The instance is immutable; matrix powers are cached
    under a lock so one network can be shared by concurrent trials.
    """

    node_count: int
    edges: frozenset[Edge]
    weights: Array
    eta: float = 0.0
    positions: Array | None = None
    _powers: dict[int, Array] = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False
    )

    def __post_init__(self) -> None:
        """Validate the weights against the edge set."""
        weights = as_matrix(self.weights).copy()
        if weights.shape != (self.node_count, self.node_count):
            msg = f"weights must be {self.node_count}x{self.node_count}"
            raise ValueError(msg)
        _check_doubly_stochastic(weights)
        if np.any(np.diag(weights) <= 0.0):
            msg = "every node needs a positive self weight"
            raise ValueError(msg)
        support = {
            (i, j)
            for i in range(self.node_count)
            for j in range(i + 1, self.node_count)
            if weights[i, j] > 0.0
        }
        if support != set(self.edges):
            msg = "positive off-diagonal weights must match the edge set"
            raise ValueError(msg)
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Iterable[int]],
        node_count: int,
        *,
        eta: float = 0.0,
        positions: Array | None = None,
    ) -> "ConsensusNetwork":
        """Build a network with Metropolis weights, optionally blended by ``eta``."""
        pairs = _normalize_edges(edges)
        weights = metropolis_weights(pairs, node_count)
        if eta:
            weights = blend_weights(weights, eta)
        return cls(node_count, pairs, weights, eta=eta, positions=positions)

    @classmethod
    def single(cls) -> "ConsensusNetwork":
        """Return the one-node network."""
        return cls(1, frozenset(), np.ones((1, 1)))

    @property
    def graph(self) -> nx.Graph:
        """Return the topology as a networkx graph."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        graph.add_edges_from(self.edges)
        return graph

    def blend(self, eta: float) -> "ConsensusNetwork":
        """Return a copy with weights ``eta * I + (1 - eta) * L``."""
        return ConsensusNetwork(
            self.node_count,
            self.edges,
            blend_weights(self.weights, eta),
            eta=eta,
            positions=self.positions,
        )

    def power(self, k: int) -> Array:
        """Return ``L^k``, computed by repeated multiplication and cached."""
        if k < 0:
            msg = f"matrix power exponent must be nonnegative, got {k}"
            raise ValueError(msg)
        with self._lock:
            if k not in self._powers:
                if not self._powers:
                    identity = np.eye(self.node_count)
                    identity.flags.writeable = False
                    self._powers[0] = identity
                top = max(self._powers)
                result = self._powers[top]
                for p in range(top + 1, k + 1):
                    result = result @ self.weights
                    result.flags.writeable = False
                    self._powers[p] = result
            return self._powers[k]

    def consensus_row(self, i: int, k: int) -> Array:
        """Return row ``i`` of ``L^k``."""
        return self.power(k)[i]

    def fuse(self, payload: Array, rounds: int = 1, *, axis: int = 0) -> Array:
        """
        Run synchronous consensus rounds ``Z_i <- sum_j l_ij Z_j`` on ``payload``.

        ``axis`` is the node axis of ``payload``.
        """
        moved = np.moveaxis(payload, axis, 0)
        for _ in range(rounds):
            moved = np.tensordot(self.weights, moved, axes=(1, 0))
        return np.moveaxis(moved, 0, axis)

    def spectral_data(self) -> SpectralData:
        """Return the second largest eigenvalue magnitude and graph diameter."""
        eigenvalues = np.sort(np.abs(np.linalg.eigvalsh(self.weights)))[::-1]
        lambda2 = float(eigenvalues[1]) if self.node_count > 1 else 0.0
        graph = self.graph
        connected = nx.is_connected(graph)
        diameter = int(nx.diameter(graph)) if connected else None
        return SpectralData(lambda2=lambda2, diameter=diameter, connected=connected)

    def to_file(self) -> NetworkFile:
        """Return the JSON file model with 1-based edges and explicit weights."""
        return NetworkFile(
            n=self.node_count,
            edges=[[i + 1, j + 1] for i, j in sorted(self.edges)],
            weights=self.weights.tolist(),
            eta=0.0,
        )

    @classmethod
    def from_file(cls, data: NetworkFile) -> "ConsensusNetwork":
        """Build a network from the JSON file model."""
        edges = [(i - 1, j - 1) for i, j in data.edges]
        if any(not (0 <= v < data.n) for edge in edges for v in edge):
            msg = f"edge endpoints must lie in 1..{data.n}"
            raise ValueError(msg)
        graph = nx.Graph()
        graph.add_nodes_from(range(data.n))
        graph.add_edges_from(edges)
        if not nx.is_connected(graph):
            msg = f"the graph file has {nx.number_connected_components(graph)} parts"
            raise DisconnectedNetworkError(msg)
        if data.weights == "metropolis":
            return cls.from_edges(edges, data.n, eta=data.eta)
        network = cls(data.n, _normalize_edges(edges), np.asarray(data.weights))
        return network.blend(data.eta) if data.eta else network


def build_random_geometric(
    node_count: int,
    side_length: float,
    comm_radius: float,
    rng_seed: int,
) -> ConsensusNetwork:
    """
    Place nodes uniformly in a square and link those within ``comm_radius``.

    Placements are redrawn until the graph is connected.
    """
    if node_count < 2:
        msg = "a geometric network needs at least two nodes"
        raise ValueError(msg)
    if side_length <= 0.0 or comm_radius <= 0.0:
        msg = "side_length and comm_radius must be positive"
        raise ValueError(msg)
    rng = np.random.default_rng(rng_seed)
    for attempt in range(MAX_PLACEMENT_RETRIES):
        positions = rng.uniform(0.0, side_length, size=(node_count, 2))
        graph = nx.random_geometric_graph(
            node_count,
            comm_radius,
            pos={i: tuple(p) for i, p in enumerate(positions)},
        )
        if nx.is_connected(graph):
            logger.debug("Connected placement found after %d attempts", attempt + 1)
            return ConsensusNetwork.from_edges(
                graph.edges, node_count, positions=positions
            )
    msg = "disconnected after max retries"
    raise DisconnectedNetworkError(msg)


def build_named_topology(
    kind: TopologyKind | str,
    node_count: int,
    rng_seed: int = 0,
) -> ConsensusNetwork:
    """Build a line, circle, complete or small world network with Metropolis weights."""
    if node_count < 2:
        msg = "a named topology needs at least two nodes"
        raise ValueError(msg)
    match kind:
        case "line":
            graph = nx.path_graph(node_count)
        case "circle":
            graph = nx.cycle_graph(node_count)
        case "complete":
            graph = nx.complete_graph(node_count)
        case "small_world":
            try:
                graph = nx.connected_watts_strogatz_graph(
                    node_count,
                    min(SMALL_WORLD_DEGREE, node_count),
                    SMALL_WORLD_REWIRE,
                    tries=MAX_PLACEMENT_RETRIES,
                    seed=rng_seed,
                )
            except nx.NetworkXError as e:
                msg = "disconnected after max retries"
                raise DisconnectedNetworkError(msg) from e
        case _:
            msg = f"unknown topology kind: {kind}"
            raise ValueError(msg)
    return ConsensusNetwork.from_edges(graph.edges, node_count)


def build_network(spec: NetworkSpec) -> ConsensusNetwork:
    """Build the network described by an experiment config."""
    if spec.kind == "geometric":
        network = build_random_geometric(
            spec.node_count, spec.side_length, spec.comm_radius, spec.seed
        )
    elif spec.kind == "file":
        if spec.path is None:
            msg = "a file network needs a path"
            raise ValueError(msg)
        network = load_network(spec.path)
    else:
        network = build_named_topology(spec.kind, spec.node_count, spec.seed)
    logger.info(
        "Built %s network with %d nodes and %d edges",
        spec.kind,
        network.node_count,
        len(network.edges),
    )
    return network


def load_network(path: Path) -> ConsensusNetwork:
    """Read a network from a JSON graph file."""
    with path.open() as f:
        data = NetworkFile.model_validate(json.load(f))
    return ConsensusNetwork.from_file(data)


def save_network(network: ConsensusNetwork, path: Path) -> None:
    """Write a network as a JSON graph file."""
    path.write_text(network.to_file().model_dump_json(indent=2))
