"""Drive any filter over a batch of simulated trajectories."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..models import Algorithm
from ..network import ConsensusNetwork
from ..system import PlantModel, SensorSuite, Trajectory
from ..utils import Array
from .base import NodeFilterState, initial_state
from .ckf import ckf_step
from .consensus import ci_step, cm_step, hcmci_step
from .modified import init_qws, modified_cm_step, modified_ci_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterOptions:
    """Per-run filter options."""

    omega: float | None = None
    """HCMCI gain; the node count when unset."""
    rel_tol: float | None = None
    """Pseudoinverse cutoff relative to the largest eigenvalue."""
    freeze_qws: bool = False
    qws_seed: int = 0
    """Seed of the direct method's auxiliary rows."""
    naive_mode: bool = False
    record_qws: bool = False


@dataclass(frozen=True, eq=False)
class FilterHistory:
    """Posterior estimates and covariances for steps ``1..K``."""

    x_post: Array
    """Shape ``(B, K, N, n)``."""
    P_post: Array
    """Shape ``(Bc, K, N, n, n)``."""
    qws: Array | None = None
    """Fused covariance estimates, shape ``(Bc, K, N, n, n)``, when recorded."""

    @property
    def steps(self) -> int:
        """The number of filtered steps."""
        return self.x_post.shape[1]


def trial_generators(
    trajectories: Sequence[Trajectory],
) -> list[np.random.Generator]:
    """Return the filter-side generator of each trial, independent of simulation."""
    return [np.random.default_rng([t.rng_seed, 1]) for t in trajectories]


def _advance(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
    options: FilterOptions,
    rngs: Sequence[np.random.Generator],
) -> NodeFilterState:
    match state.algorithm:
        case Algorithm.CKF:
            return ckf_step(state, measurements, plant, sensors)
        case Algorithm.CM:
            return cm_step(state, measurements, network, gamma, plant, sensors)
        case Algorithm.CI:
            return ci_step(state, measurements, network, gamma, plant, sensors)
        case Algorithm.HCMCI:
            return hcmci_step(
                state, measurements, network, gamma, plant, sensors, options.omega
            )
        case Algorithm.MCM_DIRECT | Algorithm.MCM_STOCH:
            return modified_cm_step(
                state,
                measurements,
                network,
                gamma,
                plant,
                sensors,
                rngs=rngs,
                rel_tol=options.rel_tol,
            )
        case Algorithm.MCI_DIRECT | Algorithm.MCI_STOCH:
            return modified_ci_step(
                state,
                measurements,
                network,
                gamma,
                plant,
                sensors,
                rngs=rngs,
                rel_tol=options.rel_tol,
            )


def run_filter(
    algorithm: Algorithm,
    trajectories: Sequence[Trajectory],
    network: ConsensusNetwork,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
    options: FilterOptions | None = None,
    rngs: Sequence[np.random.Generator] | None = None,
) -> FilterHistory:
    """
    Filter every trajectory with ``algorithm`` and return the posterior history.

    All trajectories must share their length. The result depends only on the
    trajectories, ``options`` and ``rngs``.
    """
    if not trajectories:
        msg = "at least one trajectory is required"
        raise ValueError(msg)
    if gamma < 1:
        msg = "gamma must be at least 1"
        raise ValueError(msg)
    if network.node_count != sensors.node_count:
        msg = "the network and the sensor suite disagree on the node count"
        raise ValueError(msg)
    options = options or FilterOptions()
    rngs = trial_generators(trajectories) if rngs is None else rngs
    measurements = np.stack([sensors.info_vectors(t) for t in trajectories])
    batch, steps = measurements.shape[:2]
    state = initial_state(algorithm, plant, batch, network.node_count)
    if algorithm.is_modified:
        state = init_qws(
            state,
            "stochastic" if algorithm.is_stochastic else "direct",
            network,
            sensors,
            qws_seed=options.qws_seed,
            naive_mode=options.naive_mode,
            freeze=options.freeze_qws,
        )
    x_post: list[Array] = []
    P_post: list[Array] = []
    qws: list[Array] = []
    for k in range(steps):
        state = _advance(
            state,
            measurements[:, k],
            network,
            gamma,
            plant,
            sensors,
            options,
            rngs,
        )
        x_post.append(state.x_post)
        P_post.append(state.P_post)
        if options.record_qws and state.qws is not None:
            qws.append(state.qws)
    if state.freeze is not None:
        logger.debug(
            "%s froze %.0f%% of QWS estimates",
            algorithm,
            100 * state.freeze.frozen_fraction,
        )
    return FilterHistory(
        x_post=np.stack(x_post, axis=1),
        P_post=np.stack(P_post, axis=1),
        qws=np.stack(qws, axis=1) if qws else None,
    )
