"""Consensus on measurements, consensus on information and their hybrid."""

from ..network import ConsensusNetwork
from ..system import PlantModel, SensorSuite
from ..utils import Array
from .base import (
    FusionRound,
    NodeFilterState,
    information_update,
    predict,
    prior_information,
)


def cm_step(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
) -> NodeFilterState:
    """
    Consensus on measurements.

    The fused measurement terms are scaled by ``N`` and added to each node's
    own prior information.
    """
    state = predict(state, plant)
    V, J = prior_information(state)
    fused = (
        FusionRound()
        .add("y", measurements)
        .add("S", sensors.info_matrices[None])
        .run(network, gamma)
    )
    N = network.node_count
    return information_update(state, V, J, N * fused["S"], N * fused["y"])


def _ci_correction(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    sensors: SensorSuite,
    omega: float | None,
) -> NodeFilterState:
    V, J = prior_information(state)
    fused = (
        FusionRound()
        .add("J", J)
        .add("V", V)
        .add("y", measurements)
        .add("S", sensors.info_matrices[None])
        .run(network, gamma)
    )
    H, h = fused["S"], fused["y"]
    if omega is not None:
        H, h = omega * H, omega * h
    return information_update(state, fused["V"], fused["J"], H, h)


def ci_step(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
) -> NodeFilterState:
    """Consensus on information: fuse the prior pair and the measurement pair."""
    state = predict(state, plant)
    return _ci_correction(state, measurements, network, gamma, sensors, None)


def hcmci_step(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
    omega: float | None = None,
) -> NodeFilterState:
    """CI fusion with the measurement terms scaled by ``omega`` (default ``N``)."""
    if omega is None:
        omega = float(network.node_count)
    if omega <= 0.0:
        msg = f"omega must be positive, got {omega}"
        raise ValueError(msg)
    state = predict(state, plant)
    return _ci_correction(state, measurements, network, gamma, sensors, omega)
