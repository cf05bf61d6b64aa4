"""
Distributed estimation of the quadratic weighted sum ``sum_j (l_ij^(g))^2 X_j``.

With ``X_j = C_j^T R_j^-1 C_j`` this sum is the exact noise covariance of the
fused measurement at node ``i``. Two estimators are provided: the direct method,
which runs a persistent consensus on random rows ``q_i``, and the stochastic
method, which averages outer products of fused Gaussian samples.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DisconnectedNetworkError, RankDeficientError
from .network import ConsensusNetwork
from .utils import (
    Array,
    check_symmetric,
    is_full_rank,
    numerical_rank,
    pinv_sym,
    psd_sqrt,
    symmetrize,
)

logger = logging.getLogger(__name__)

MAX_Q_REDRAWS = 100
FREEZE_TOL = 1e-12
FREEZE_PATIENCE = 10


@dataclass(frozen=True, eq=False)
class InfoFactor:
    """A node's PSD matrix ``X`` and a square factor with ``Y^T Y = X``."""

    node: int
    X: Array
    Y: Array


def factor_info(X: Array) -> Array:
    """Return the symmetric PSD square root ``Y`` of ``X``, so ``Y^T Y = X``."""
    check_symmetric(X, name="X")
    return psd_sqrt(X)


def factor_all(X: Array) -> list[InfoFactor]:
    """Factor a stack of per-node matrices."""
    return [InfoFactor(node=i, X=x, Y=factor_info(x)) for i, x in enumerate(X)]


def exact_qws_oracle(
    network: ConsensusNetwork,
    gamma: int,
    X: Array,
    i: int | None = None,
) -> Array:
    """
    Evaluate the weighted sum centrally.

    Returns the matrix for node ``i``, or the stack for every node when ``i`` is
    None. Only tests and diagnostics use this.
    """
    if gamma < 1:
        msg = "gamma must be at least 1"
        raise ValueError(msg)
    weights = network.power(gamma) ** 2
    result = np.einsum("ij,jab->iab", weights, X)
    return result if i is None else result[i]


def pseudo_inverse(M: Array, rel_tol: float | None = None) -> Array:
    """Pseudoinverse of a symmetric PSD matrix by eigendecomposition."""
    check_symmetric(M, name="matrix")
    return pinv_sym(M, rel_tol)


@dataclass(frozen=True, eq=False)
class DirectState:
    """
    Per-node state of the direct method, stacked over nodes.

    ``u`` holds the ``S`` blocks ``[u_i]_s`` of ``u_i = Y_i^T (q_i kron I_n)``
    after fusion; the Kronecker product is never formed.
    """

    q: Array
    """Auxiliary rows, shape ``(N, S)``; naive rows are zero in naive mode."""
    Y: Array
    """Square factors, shape ``(N, n, n)``."""
    W: Array
    """Running consensus on ``N q_i^T q_i``, shape ``(N, S, S)``."""
    u: Array
    """Fused auxiliary blocks, shape ``(N, S, n, n)``."""
    count: int = 0
    """Total consensus rounds applied to ``W``."""

    @property
    def width(self) -> int:
        """The length ``S`` of each auxiliary row."""
        return self.q.shape[1]


def direct_payload(q: Array, Y: Array) -> Array:
    """Return the blocks of ``Y_i^T (q_i kron I_n)`` for every node."""
    return q[:, :, None, None] * np.swapaxes(Y, -1, -2)[:, None, :, :]


def direct_init(
    network: ConsensusNetwork,
    factors: Array,
    rng_seed: int,
    *,
    naive_mode: bool = False,
    naive_set: frozenset[int] | None = None,
) -> DirectState:
    """
    Draw the auxiliary rows and seed ``W_i = N q_i^T q_i``.

    In naive mode the rows span only the sensing nodes and naive rows are zero.
    The stacked rows are redrawn until they pass a rank test.
    """
    node_count = network.node_count
    if factors.shape[0] != node_count:
        msg = "need one factor per node"
        raise ValueError(msg)
    if naive_mode:
        if naive_set is None:
            naive_set = frozenset(
                i for i in range(node_count) if not np.any(factors[i])
            )
        active = [i for i in range(node_count) if i not in naive_set]
    else:
        active = list(range(node_count))
    if not active:
        msg = "naive mode needs at least one sensing node"
        raise ValueError(msg)
    width = len(active)
    rng = np.random.default_rng(rng_seed)
    for attempt in range(MAX_Q_REDRAWS):
        rows = rng.standard_normal((width, width))
        if is_full_rank(rows):
            break
        logger.warning("Auxiliary rows rank deficient, redrawing (%d)", attempt + 1)
    else:
        msg = "rank-deficient Q after redraw limit"
        raise RankDeficientError(msg)
    q = np.zeros((node_count, width))
    q[active] = rows
    W = node_count * np.einsum("is,it->ist", q, q)
    return DirectState(q=q, Y=factors, W=W, u=direct_payload(q, factors))


def direct_estimate(u: Array, W: Array, rel_tol: float | None = None) -> Array:
    """Return ``U_i = u_i (W_i kron I_n)^+ u_i^T`` for every node."""
    W_pinv = pinv_sym(W, rel_tol)
    return symmetrize(np.einsum("isab,ist,itcb->iac", u, W_pinv, u))


def direct_round(
    state: DirectState,
    network: ConsensusNetwork,
    gamma: int,
    rel_tol: float | None = None,
) -> tuple[DirectState, Array]:
    """
    Run one filter step of the direct method.

    ``u`` restarts from the local payload each step while ``W`` keeps fusing
    from its previous value, so ``count`` grows by ``gamma``.
    """
    u = network.fuse(direct_payload(state.q, state.Y), gamma)
    W = network.fuse(state.W, gamma)
    new_state = replace(state, u=u, W=W, count=state.count + gamma)
    return new_state, direct_estimate(u, W, rel_tol)


def direct_closed_form(
    network: ConsensusNetwork,
    gamma: int,
    k: int,
    X: Array,
) -> Array:
    """Return ``(1/N) sum_j (l_ij^(g))^2 / l_ij^(k) X_j`` for every node."""
    lg = network.power(gamma)
    lk = network.power(k)
    ratio = np.divide(lg**2, lk, out=np.zeros_like(lg), where=lg > 0.0)
    return np.einsum("ij,jab->iab", ratio, X) / network.node_count


@dataclass(frozen=True)
class DirectBound:
    """Relative error bounds on the direct method estimate at one consensus count."""

    exact: Array
    """``max_j |1 / (N l_ij^(k)) - 1|`` over the ``gamma``-hop neighbours, per node."""
    spectral: float | None
    """``N lambda2^k / (1 - N lambda2^k)``, absent while ``N lambda2^k >= 1``."""


def direct_bound_start(network: ConsensusNetwork, gamma: int) -> int:
    """Smallest consensus count ``k >= gamma`` where the spectral bound applies."""
    data = network.spectral_data()
    if not data.connected or data.lambda2 >= 1.0:
        msg = "the spectral bound needs a connected network"
        raise DisconnectedNetworkError(msg)
    lambda2 = data.lambda2
    if lambda2 == 0.0 or network.node_count == 1:
        return gamma
    k0 = math.floor(math.log(1.0 / network.node_count) / math.log(lambda2)) + 1
    while network.node_count * lambda2**k0 >= 1.0:
        k0 += 1
    return max(gamma, k0)


def direct_error_bound(network: ConsensusNetwork, gamma: int, k: int) -> DirectBound:
    """Return both forms of the direct method's relative error bound."""
    if k < gamma:
        msg = f"consensus count {k} must be at least gamma {gamma}"
        raise ValueError(msg)
    node_count = network.node_count
    lg = network.power(gamma)
    lk = network.power(k)
    support = lg > 0.0
    deviation = np.abs(
        np.divide(1.0, node_count * lk, out=np.ones_like(lk), where=support) - 1.0
    )
    exact = np.max(np.where(support, deviation, 0.0), axis=1)
    lambda2 = network.spectral_data().lambda2
    if lambda2 == 0.0:
        return DirectBound(exact=exact, spectral=0.0)
    rho = node_count * lambda2**k
    spectral = rho / (1.0 - rho) if rho < 1.0 else None
    return DirectBound(exact=exact, spectral=spectral)


@dataclass(frozen=True, eq=False)
class StochasticState:
    """Running sample covariance of the stochastic method, batched over trials."""

    Y: Array
    """Square factors, shape ``(N, n, n)``."""
    average: Array
    """Running average, shape ``(B, N, n, n)``."""
    count: int = 0
    sample: Array | None = None
    """The last fused sample, shape ``(B, N, n)``."""


def stochastic_init(factors: Array, batch: int = 1) -> StochasticState:
    """Start an empty running average for ``batch`` independent runs."""
    node_count, n, _ = factors.shape
    return StochasticState(Y=factors, average=np.zeros((batch, node_count, n, n)))


def stochastic_payload(Y: Array, theta: Array) -> Array:
    """Return ``Y_i^T theta_i`` for draws ``theta`` of shape ``(B, N, n)``."""
    return np.einsum("jcd,bjc->bjd", Y, theta)


def stochastic_update(state: StochasticState, fused: Array) -> StochasticState:
    """Fold one fused sample per node into the running average."""
    k = state.count + 1
    outer = fused[..., :, None] * fused[..., None, :]
    average = ((k - 1) * state.average + outer) / k
    return replace(state, average=average, count=k, sample=fused)


def stochastic_round(
    state: StochasticState,
    network: ConsensusNetwork,
    gamma: int,
    rng: np.random.Generator,
) -> StochasticState:
    """Draw ``theta ~ N(0, I)`` per node, fuse ``gamma`` rounds and update."""
    batch, node_count, n, _ = state.average.shape
    theta = rng.standard_normal((batch, node_count, n))
    fused = network.fuse(stochastic_payload(state.Y, theta), gamma, axis=1)
    return stochastic_update(state, fused)


@dataclass(frozen=True)
class MomentPrediction:
    """Predicted moments of the stochastic estimate after ``k`` samples."""

    rank: int
    inverse_scale: float
    """``E[U^+] = inverse_scale * X^+``."""
    mse_forward: float
    """``E ||U - X||_F^2``."""
    mse_inverse: float
    """``E ||U^+ - X^+||_F^2``."""


def stochastic_moment_predictions(
    X_tilde: Array,
    k: int,
    rel_tol: float | None = None,
) -> MomentPrediction:
    """Return the Wishart moment predictions for ``k`` fused samples."""
    n = X_tilde.shape[-1]
    if k <= n + 3:
        msg = f"moment predictions need k > n + 3 = {n + 3}, got {k}"
        raise ValueError(msg)
    r = numerical_rank(X_tilde, rel_tol)
    X_pinv = pinv_sym(X_tilde, rel_tol)
    denominator = (k - r - 3) * (k - r - 1) * (k - r)
    alpha1 = (k**2 + k * (r**2 + 2 * r + 3) - (r**3 + 4 * r**2 + 3 * r)) / denominator
    alpha2 = k**2 / denominator
    trace = float(np.trace(X_tilde))
    trace_inv = float(np.trace(X_pinv))
    return MomentPrediction(
        rank=r,
        inverse_scale=k / (k - r - 1),
        mse_forward=(float(np.trace(X_tilde @ X_tilde)) + trace**2) / k,
        mse_inverse=alpha1 * float(np.trace(X_pinv @ X_pinv)) + alpha2 * trace_inv**2,
    )


@dataclass
class FreezeTracker:
    """
    Hold a fused covariance estimate once it stops moving.

    An entry freezes after its Frobenius step change stays below ``tol`` for
    ``patience`` consecutive steps.
    """

    tol: float = FREEZE_TOL
    patience: int = FREEZE_PATIENCE
    streak: Array | None = field(default=None, repr=False)
    previous: Array | None = field(default=None, repr=False)

    def apply(self, current: Array) -> Array:
        """Return the estimate to use this step."""
        previous, streak = self.previous, self.streak
        if previous is None or streak is None or previous.shape != current.shape:
            self.previous = current
            self.streak = np.zeros(current.shape[:-2], dtype=np.int64)
            return current
        frozen = streak >= self.patience
        result = np.where(frozen[..., None, None], previous, current)
        settled = np.linalg.norm(current - previous, axis=(-2, -1)) < self.tol
        self.streak = np.where(frozen, streak, np.where(settled, streak + 1, 0))
        self.previous = result
        return result

    @property
    def frozen_fraction(self) -> float:
        """Share of entries currently frozen."""
        if self.streak is None:
            return 0.0
        return float(np.mean(self.streak >= self.patience))
