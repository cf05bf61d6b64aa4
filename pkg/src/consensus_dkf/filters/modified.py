"""
Modified CM and Modified CI.

Both replace the implicit fused noise covariance of CM and CI by an online
estimate of the exact one, computed alongside the other fused quantities by
the direct or the stochastic QWS method.
"""

from collections.abc import Sequence
from dataclasses import replace
from typing import Literal

import numpy as np

from ..network import ConsensusNetwork
from ..qws import (
    DirectState,
    FreezeTracker,
    StochasticState,
    direct_estimate,
    direct_init,
    direct_payload,
    factor_all,
    stochastic_init,
    stochastic_payload,
    stochastic_update,
)
from ..system import PlantModel, SensorSuite
from ..utils import Array, pinv_sym, symmetrize
from .base import (
    FusionRound,
    NodeFilterState,
    information_update,
    predict,
    prior_information,
)

type QwsMode = Literal["direct", "stochastic"]


def init_qws(
    state: NodeFilterState,
    mode: QwsMode,
    network: ConsensusNetwork,
    sensors: SensorSuite,
    *,
    qws_seed: int = 0,
    naive_mode: bool = False,
    freeze: bool = False,
) -> NodeFilterState:
    """Attach the auxiliary QWS state a modified filter starts from."""
    factors = np.stack([f.Y for f in factor_all(sensors.info_matrices)])
    aux: DirectState | StochasticState
    if mode == "direct":
        aux = direct_init(network, factors, qws_seed, naive_mode=naive_mode)
    else:
        aux = stochastic_init(factors, state.batch)
    return replace(state, aux=aux, freeze=FreezeTracker() if freeze else None)


def draw_theta(
    rngs: Sequence[np.random.Generator],
    node_count: int,
    dim: int,
) -> Array:
    """Draw ``theta_i ~ N(0, I)`` for every node, one generator per trial."""
    return np.stack([rng.standard_normal((node_count, dim)) for rng in rngs])


def _fuse_modified(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    sensors: SensorSuite,
    rngs: Sequence[np.random.Generator] | None,
    *,
    with_prior: bool,
) -> dict[str, Array]:
    fusion = FusionRound()
    if with_prior:
        V, J = prior_information(state)
        fusion.add("J", J).add("V", V)
    fusion.add("y", measurements).add("S", sensors.info_matrices[None])
    aux = state.aux
    match aux:
        case DirectState():
            fusion.add("u", direct_payload(aux.q, aux.Y), axis=0)
            fusion.add("W", aux.W, axis=0)
        case StochasticState():
            if rngs is None or len(rngs) != state.batch:
                msg = "the stochastic method needs one generator per trial"
                raise ValueError(msg)
            theta = draw_theta(rngs, state.node_count, aux.Y.shape[-1])
            fusion.add("v", stochastic_payload(aux.Y, theta))
        case None:
            msg = "modified filters need an initialized QWS state"
            raise ValueError(msg)
    return fusion.run(network, gamma)


def _estimate(
    state: NodeFilterState,
    fused: dict[str, Array],
    gamma: int,
    rel_tol: float | None,
) -> tuple[NodeFilterState, Array]:
    aux = state.aux
    if isinstance(aux, DirectState):
        U = direct_estimate(fused["u"], fused["W"], rel_tol)[None]
        aux = replace(aux, u=fused["u"], W=fused["W"], count=aux.count + gamma)
    elif isinstance(aux, StochasticState):
        aux = stochastic_update(aux, fused["v"])
        U = aux.average
    else:
        msg = "modified filters need an initialized QWS state"
        raise ValueError(msg)
    if state.freeze is not None:
        U = state.freeze.apply(U)
    return replace(state, aux=aux, qws=U), U


def _measurement_terms(
    fused: dict[str, Array],
    U: Array,
    rel_tol: float | None,
) -> tuple[Array, Array]:
    """Return ``C^T U^+ C`` and ``C^T U^+ y`` with ``C = S^(gamma)``."""
    C_tilde = fused["S"]
    gain = C_tilde @ pinv_sym(U, rel_tol)
    H = symmetrize(gain @ C_tilde)
    h = (gain @ fused["y"][..., None])[..., 0]
    return H, h


def modified_cm_step(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
    *,
    rngs: Sequence[np.random.Generator] | None = None,
    rel_tol: float | None = None,
) -> NodeFilterState:
    """
    Modified CM with the direct or the stochastic QWS method.

    The mode follows the auxiliary state attached by :func:`init_qws`.
    """
    state = predict(state, plant)
    fused = _fuse_modified(
        state, measurements, network, gamma, sensors, rngs, with_prior=False
    )
    state, U = _estimate(state, fused, gamma, rel_tol)
    H, h = _measurement_terms(fused, U, rel_tol)
    V, J = prior_information(state)
    return information_update(state, V, J, H, h)


def modified_ci_step(
    state: NodeFilterState,
    measurements: Array,
    network: ConsensusNetwork,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
    *,
    rngs: Sequence[np.random.Generator] | None = None,
    rel_tol: float | None = None,
) -> NodeFilterState:
    """Modified CI: fused prior information plus the exact covariance term."""
    state = predict(state, plant)
    fused = _fuse_modified(
        state, measurements, network, gamma, sensors, rngs, with_prior=True
    )
    state, U = _estimate(state, fused, gamma, rel_tol)
    H, h = _measurement_terms(fused, U, rel_tol)
    return information_update(state, fused["V"], fused["J"], H, h)
