"""
State and shared steps of the batched per-node filters.

Every array carries a leading trial axis and then the node axis. Covariances
that do not depend on the trial have a leading axis of length one and are
shared through broadcasting.
"""

from dataclasses import dataclass, field, replace
from typing import Self

import numpy as np

from ..models import Algorithm
from ..network import ConsensusNetwork
from ..qws import DirectState, FreezeTracker, StochasticState
from ..system import PlantModel
from ..utils import Array, inv_sym, symmetrize

__all__ = [
    "Algorithm",
    "FusionRound",
    "NodeFilterState",
    "information_update",
    "initial_state",
    "predict",
    "prior_information",
]


@dataclass(frozen=True, eq=False)
class NodeFilterState:
    """Estimates and covariances of every node, batched over trials."""

    algorithm: Algorithm
    x_prior: Array
    """``x_{k|k-1}``, shape ``(B, N, n)``."""
    P_prior: Array
    """``P_{k|k-1}``, shape ``(Bc, N, n, n)``."""
    x_post: Array
    """``x_{k|k}``, shape ``(B, N, n)``."""
    P_post: Array
    """``P_{k|k}``, shape ``(Bc, N, n, n)``."""
    step: int = 0
    aux: DirectState | StochasticState | None = None
    freeze: FreezeTracker | None = None
    qws: Array | None = field(default=None, repr=False)
    """The fused covariance estimate used by the last correction."""

    @property
    def batch(self) -> int:
        """The number of trials."""
        return self.x_post.shape[0]

    @property
    def node_count(self) -> int:
        """The number of nodes."""
        return self.x_post.shape[1]


def initial_state(
    algorithm: Algorithm,
    plant: PlantModel,
    batch: int,
    node_count: int,
) -> NodeFilterState:
    """Start every node at the prior mean with covariance ``P0``."""
    x0 = np.broadcast_to(plant.x0_mean, (batch, node_count, plant.dim)).copy()
    P0 = np.broadcast_to(plant.P0, (1, node_count, plant.dim, plant.dim)).copy()
    return NodeFilterState(algorithm, x0, P0, x0, P0)


def predict(state: NodeFilterState, plant: PlantModel) -> NodeFilterState:
    """Propagate the posterior through the plant."""
    A = plant.A
    x_prior = state.x_post @ A.T
    P_prior = symmetrize(A @ state.P_post @ A.T + plant.Q)
    return replace(state, x_prior=x_prior, P_prior=P_prior, step=state.step + 1)


def prior_information(state: NodeFilterState) -> tuple[Array, Array]:
    """Return ``(P^-1, P^-1 x)`` of the prior."""
    V = inv_sym(state.P_prior)
    J = (V @ state.x_prior[..., None])[..., 0]
    return V, J


def information_update(
    state: NodeFilterState,
    info_matrix: Array,
    info_vector: Array,
    H: Array,
    h: Array,
) -> NodeFilterState:
    """
    Correct with ``P = (V + H)^-1`` and ``x = P (J + h)``.

    ``info_matrix`` and ``info_vector`` are the prior information pair the
    algorithm uses; ``H`` and ``h`` are its measurement terms.
    """
    P_post = symmetrize(inv_sym(info_matrix + H))
    x_post = (P_post @ (info_vector + h)[..., None])[..., 0]
    return replace(state, x_post=x_post, P_post=P_post)


@dataclass
class FusionRound:
    """
    Labelled payloads fused together in one synchronous consensus exchange.

    Every node carries the same labels; each label is an array whose
    ``axis`` indexes the nodes.
    """

    payloads: dict[str, tuple[Array, int]] = field(default_factory=dict)
    rounds: int = 0

    def add(self, label: str, payload: Array, axis: int = 1) -> Self:
        """Queue ``payload`` under ``label``."""
        if label in self.payloads:
            msg = f"duplicate fusion label: {label}"
            raise ValueError(msg)
        self.payloads[label] = (payload, axis)
        return self

    def run(self, network: ConsensusNetwork, rounds: int) -> dict[str, Array]:
        """Apply ``rounds`` consensus rounds to every label."""
        if rounds < 1:
            msg = "gamma must be at least 1"
            raise ValueError(msg)
        for label, (payload, axis) in self.payloads.items():
            if payload.shape[axis] != network.node_count:
                msg = f"payload {label} does not have one entry per node"
                raise ValueError(msg)
        self.rounds += rounds
        return {
            label: network.fuse(payload, rounds, axis=axis)
            for label, (payload, axis) in self.payloads.items()
        }
