"""The centralized Kalman filter in information form."""

from ..system import PlantModel, SensorSuite
from ..utils import Array
from .base import NodeFilterState, information_update, predict, prior_information


def ckf_step(
    state: NodeFilterState,
    measurements: Array,
    plant: PlantModel,
    sensors: SensorSuite,
) -> NodeFilterState:
    """
    Run one prediction and correction with every sensor's measurement.

    ``measurements`` holds ``C_i^T R_i^-1 y_{i,k}`` with shape ``(B, N, n)``.
    Every node carries the same centralized estimate.
    """
    state = predict(state, plant)
    V, J = prior_information(state)
    H = sensors.info_matrices.sum(axis=0)
    h = measurements.sum(axis=1, keepdims=True)
    return information_update(state, V, J, H, h)
