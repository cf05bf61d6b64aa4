"""
Steady-state Riccati and Lyapunov predictors for the consensus filters.

Every solver is a plain fixed-point iteration in information form. The
predictors return both the covariance a filter reports and the covariance of
the error it actually makes, so consistency can be checked against theory.
"""

import logging
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la

from .errors import (
    ConvergenceError,
    RangeMismatchError,
    UnobservableError,
    UnstableLyapunovError,
)
from .models import Algorithm
from .network import ConsensusNetwork, metropolis_weights
from .qws import exact_qws_oracle
from .system import PlantModel, SensorSuite
from .utils import (
    Array,
    as_matrix,
    default_rel_tol,
    inv_sym,
    is_observable,
    min_eig,
    pinv_sym,
    psd_sqrt,
    spectral_radius,
    symmetrize,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-11
DEFAULT_MAX_ITER = 100_000
RANGE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DareProblem:
    """``P = A (P^-1 + C^T R^-1 C)^-1 A^T + Q``."""

    A: Array
    C: Array
    Q: Array
    R: Array

    def __post_init__(self) -> None:
        """Check dimensions, positive definiteness and observability."""
        A, C, Q, R = (as_matrix(m) for m in (self.A, self.C, self.Q, self.R))
        if C.shape[1] != A.shape[0] or R.shape != (C.shape[0], C.shape[0]):
            msg = "inconsistent DARE dimensions"
            raise ValueError(msg)
        if float(min_eig(Q)) <= 0.0 or float(min_eig(R)) <= 0.0:
            msg = "Q and R must be positive definite"
            raise ValueError(msg)
        if not is_observable(A, C):
            msg = "(A, C) is not observable"
            raise UnobservableError(msg)
        for name, value in (("A", A), ("C", C), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, value)

    @classmethod
    def from_information(cls, A: Array, Q: Array, H: Array) -> "DareProblem":
        """Build a problem whose information term ``C^T R^-1 C`` equals ``H``."""
        return cls(A, psd_sqrt(H), Q, np.eye(H.shape[0]))

    @property
    def information(self) -> Array:
        """``C^T R^-1 C``."""
        return symmetrize(self.C.T @ inv_sym(self.R) @ self.C)


@dataclass(frozen=True, eq=False)
class HcreProblem:
    """``P_i = A (sum_j l_ij P_j^-1 + H_i)^-1 A^T + Q`` for every node."""

    A: Array
    Q: Array
    weights: Array
    information: Array
    """``H_i`` per node, shape ``(N, n, n)``."""
    C: tuple[Array, ...] | None = None
    R: tuple[Array, ...] | None = None

    def __post_init__(self) -> None:
        """Check invertibility, weights and collective observability."""
        A = as_matrix(self.A)
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= 1e-12 * s[0]:
            msg = "the HCRE needs an invertible A"
            raise ValueError(msg)
        weights = as_matrix(self.weights)
        if np.any(weights < 0.0) or np.max(np.abs(weights.sum(axis=1) - 1.0)) > 1e-10:
            msg = "HCRE weights must be nonnegative and row stochastic"
            raise ValueError(msg)
        if not is_observable(A, np.vstack(list(psd_sqrt(self.information)))):
            msg = "collectively unobservable"
            raise UnobservableError(msg)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_sensors(
        cls,
        A: Array,
        Q: Array,
        C: Sequence[Array],
        R: Sequence[Array],
        weights: Array,
    ) -> "HcreProblem":
        """Build a problem from per-node ``(C_i, R_i)``."""
        C = tuple(as_matrix(c) for c in C)
        R = tuple(as_matrix(r) for r in R)
        info = np.stack([c.T @ inv_sym(r) @ c for c, r in zip(C, R, strict=True)])
        return cls(A, Q, weights, symmetrize(info), C, R)

    @property
    def node_count(self) -> int:
        """The number of coupled equations."""
        return self.information.shape[0]


def dare_step(A: Array, Q: Array, H: Array, P: Array) -> Array:
    """One DARR iterate."""
    return symmetrize(A @ inv_sym(inv_sym(P) + H) @ A.T + Q)


def hcre_step(A: Array, Q: Array, weights: Array, H: Array, P: Array) -> Array:
    """One synchronous HCRR sweep over all nodes."""
    V = np.einsum("ij,jab->iab", weights, inv_sym(P)) + H
    return symmetrize(A @ inv_sym(V) @ A.T + Q)


def darr_iterates(problem: DareProblem, P0: Array | None = None) -> Iterator[Array]:
    """Yield the DARR sequence starting after ``P0`` (default ``Q``)."""
    H = problem.information
    P = problem.Q if P0 is None else P0
    while True:
        P = dare_step(problem.A, problem.Q, H, P)
        yield P


def hcrr_iterates(problem: HcreProblem, P0: Array | None = None) -> Iterator[Array]:
    """Yield the HCRR sequence starting after ``P0`` (default ``Q`` at every node)."""
    P = np.broadcast_to(problem.Q, problem.information.shape) if P0 is None else P0
    while True:
        P = hcre_step(problem.A, problem.Q, problem.weights, problem.information, P)
        yield P


def _fixed_point(
    iterates: Iterator[Array],
    start: Array,
    tol: float,
    max_iter: int,
) -> Array:
    P = start
    for iteration, P_next in enumerate(iterates, start=1):
        if np.max(np.linalg.norm(P_next - P, axis=(-2, -1))) < tol:
            logger.debug("Fixed point reached after %d iterations", iteration)
            return P_next
        if iteration >= max_iter:
            break
        P = P_next
    msg = "no convergence within max_iter"
    raise ConvergenceError(msg)


def solve_dare(
    problem: DareProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    P0: Array | None = None,
) -> Array:
    """Iterate the DARR until successive iterates differ by less than ``tol``."""
    start = problem.Q if P0 is None else P0
    return _fixed_point(darr_iterates(problem, start), start, tol, max_iter)


def solve_hcre(
    problem: HcreProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    P0: Array | None = None,
) -> Array:
    """Iterate the HCRR until every node moves by less than ``tol``."""
    start = np.broadcast_to(problem.Q, problem.information.shape) if P0 is None else P0
    return _fixed_point(hcrr_iterates(problem, start), start, tol, max_iter)


def dare_residual(problem: DareProblem, P: Array) -> float:
    """Frobenius norm of ``DARR(P) - P``."""
    step = dare_step(problem.A, problem.Q, problem.information, P)
    return float(np.linalg.norm(step - P))


def hcre_residual(problem: HcreProblem, P: Array) -> Array:
    """Per-node Frobenius norm of ``HCRR(P) - P``."""
    step = hcre_step(problem.A, problem.Q, problem.weights, problem.information, P)
    return np.linalg.norm(step - P, axis=(-2, -1))


def solve_lyapunov(
    F: Array,
    constant: Array,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Array:
    """Solve ``X = F X F^T + constant`` by iterating from zero."""
    radius = spectral_radius(F)
    if radius >= 1.0:
        msg = f"coupling matrix is not Schur stable (spectral radius {radius:.6f})"
        raise UnstableLyapunovError(msg)
    X = np.zeros_like(constant)
    for iteration in range(1, max_iter + 1):
        X_next = symmetrize(F @ X @ F.T + constant)
        if np.linalg.norm(X_next - X) < tol:
            logger.debug("Lyapunov iteration converged after %d steps", iteration)
            return X_next
        X = X_next
    msg = "no convergence within max_iter"
    raise ConvergenceError(msg)


def breve_R(
    C_tilde: Array,
    R_tilde: Array,
    *,
    stacked_factor: Array | None = None,
    rel_tol: float | None = None,
) -> Array:
    """
    Return a positive definite ``R`` with ``C^T R^-1 C = C^T R_tilde^+ C``.

    The zero eigenvalues of ``R_tilde`` are replaced by one. With
    ``stacked_factor`` (``F`` such that ``R_tilde = F^T F``) the spectrum comes
    from the SVD of ``F``. Full rank inputs are returned unchanged.
    """
    n = R_tilde.shape[-1]
    if rel_tol is None:
        rel_tol = default_rel_tol(n)
    if stacked_factor is not None:
        _, s, vt = np.linalg.svd(stacked_factor, full_matrices=True)
        spectrum = np.zeros(n)
        spectrum[: min(s.size, n)] = s[:n] ** 2
        basis = vt.T
    else:
        spectrum, basis = np.linalg.eigh(symmetrize(R_tilde))
    keep = spectrum > rel_tol * float(np.max(np.abs(spectrum), initial=0.0))
    if np.all(keep):
        return symmetrize(R_tilde)
    null = basis[:, ~keep]
    leak = float(np.linalg.norm(null.T @ C_tilde))
    if leak > RANGE_TOL * max(1.0, float(np.linalg.norm(C_tilde))):
        msg = f"fused observation leaves the range of R_tilde (leak {leak:.3e})"
        raise RangeMismatchError(msg)
    padded = np.where(keep, spectrum, 1.0)
    return symmetrize((basis * padded) @ basis.T)


@dataclass(frozen=True, eq=False)
class SteadyStatePrediction:
    """
    Steady-state covariances of one filter configuration.

    ``prior_estimated`` is what the filter reports and ``prior_actual`` the
    covariance of its real error; the posterior fields apply the steady
    correction to each.
    """

    algorithm: Algorithm
    gamma: int
    prior_estimated: Array
    prior_actual: Array
    posterior_estimated: Array
    posterior_actual: Array
    posterior_gain: Array
    """``P_bar_i``, the steady posterior covariance the filter reports."""
    coupling: Array | None = None
    """Block matrix of ``l_ij A P_bar_i P_j^-1`` for the joint error recursion."""
    noise_gain: Array | None = None
    """Block matrix of ``l_ij A P_bar_i M_i C_j^T R_j^-1``."""
    joint_actual: Array | None = None
    spectral_radius: float | None = None

    @property
    def consistency_margin(self) -> Array:
        """``min eig(P_i - P_tilde_i)`` per node."""
        return min_eig(self.prior_estimated - self.prior_actual)

    @property
    def posterior_consistency_margin(self) -> Array:
        """The same margin for the posterior covariances."""
        return min_eig(self.posterior_estimated - self.posterior_actual)


def fused_observation(
    sensors: SensorSuite,
    network: ConsensusNetwork,
    gamma: int,
) -> tuple[Array, Array]:
    """Return ``(C_tilde_i, R_tilde_i)`` stacked over nodes for ``gamma`` rounds."""
    X = sensors.info_matrices
    C_tilde = np.einsum("ij,jab->iab", network.power(gamma), X)
    return symmetrize(C_tilde), symmetrize(exact_qws_oracle(network, gamma, X))


def block_noise(sensors: SensorSuite) -> Array:
    """``diag(R_1, ..., R_N)``, the noise covariance paired with ``noise_gain``."""
    return la.block_diag(*sensors.R)


def _solve_nodes(
    problems: Callable[[int], DareProblem],
    count: int,
    tol: float,
) -> Array:
    solutions = []
    for i in range(count):
        try:
            problem = problems(i)
        except UnobservableError as e:
            msg = f"node {i + 1}: (A, C_tilde) is not observable"
            raise UnobservableError(msg) from e
        solutions.append(solve_dare(problem, tol))
    return np.stack(solutions)


def steady_modified_cm(
    plant: PlantModel,
    C_tilde: Array,
    R_tilde: Array,
    tol: float = DEFAULT_TOL,
) -> Array:
    """
    Per-node steady prior covariance of Modified CM.

    Each node solves a DARE with observation ``C_tilde_i`` and the regularized
    noise covariance from :func:`breve_R`. This is also the steady covariance
    of the actual error.
    """
    R_breve = [breve_R(c, r) for c, r in zip(C_tilde, R_tilde, strict=True)]
    return _solve_nodes(
        lambda i: DareProblem(plant.A, C_tilde[i], plant.Q, R_breve[i]),
        C_tilde.shape[0],
        tol,
    )


def _modified_information(C_tilde: Array, R_tilde: Array) -> Array:
    H = [
        c @ inv_sym(breve_R(c, r)) @ c for c, r in zip(C_tilde, R_tilde, strict=True)
    ]
    return symmetrize(np.stack(H))


def _cm_family(
    algorithm: Algorithm,
    gamma: int,
    plant: PlantModel,
    P: Array,
    H: Array,
    M: Array,
    R_tilde: Array,
    tol: float,
) -> SteadyStatePrediction:
    P_inv = inv_sym(P)
    P_bar = inv_sym(P_inv + H)
    noise = P_bar @ M @ R_tilde @ np.swapaxes(M, -1, -2) @ P_bar
    gain = P_bar @ P_inv
    actual = np.stack(
        [
            solve_lyapunov(plant.A @ g, plant.A @ w @ plant.A.T + plant.Q, tol)
            for g, w in zip(gain, noise, strict=True)
        ]
    )
    posterior_actual = gain @ actual @ np.swapaxes(gain, -1, -2) + noise
    return SteadyStatePrediction(
        algorithm=algorithm,
        gamma=gamma,
        prior_estimated=P,
        prior_actual=actual,
        posterior_estimated=P_bar,
        posterior_actual=symmetrize(posterior_actual),
        posterior_gain=P_bar,
    )


def _blocks(blocks: Array) -> Array:
    """Turn an ``(N, M, a, b)`` block array into an ``(N a, M b)`` matrix."""
    rows, cols, a, b = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(rows * a, cols * b)


def _diag_blocks(matrix: Array, node_count: int) -> Array:
    n = matrix.shape[0] // node_count
    return np.stack(
        [matrix[i * n : (i + 1) * n, i * n : (i + 1) * n] for i in range(node_count)]
    )


def _ci_family(
    algorithm: Algorithm,
    gamma: int,
    plant: PlantModel,
    sensors: SensorSuite,
    weights: Array,
    H: Array,
    M: Array,
    tol: float,
) -> SteadyStatePrediction:
    node_count = weights.shape[0]
    P = solve_hcre(HcreProblem(plant.A, plant.Q, weights, H), tol)
    P_inv = inv_sym(P)
    P_bar = inv_sym(np.einsum("ij,jab->iab", weights, P_inv) + H)
    G = P_bar @ M
    # Posterior error of node i: sum_j l_ij P_bar_i P_j^-1 e_j minus fused noise.
    post_coupling = _blocks(np.einsum("ij,iab,jbc->ijac", weights, P_bar, P_inv))
    shared = np.einsum("ij,kj,jab->ikab", weights, weights, sensors.info_matrices)
    post_noise = _blocks(np.einsum("iab,ikbc,kdc->ikad", G, shared, G))
    coupling = np.kron(np.eye(node_count), plant.A) @ post_coupling
    noise_gain = np.hstack(
        [
            np.vstack([weights[i, j] * plant.A @ G[i] @ g for i in range(node_count)])
            for j, g in enumerate(sensors.info_gains)
        ]
    )
    noise = noise_gain @ block_noise(sensors) @ noise_gain.T + np.kron(
        np.ones((node_count, node_count)), plant.Q
    )
    joint = solve_lyapunov(coupling, symmetrize(noise), tol)
    posterior_joint = post_coupling @ joint @ post_coupling.T + post_noise
    return SteadyStatePrediction(
        algorithm=algorithm,
        gamma=gamma,
        prior_estimated=P,
        prior_actual=_diag_blocks(joint, node_count),
        posterior_estimated=P_bar,
        posterior_actual=_diag_blocks(symmetrize(posterior_joint), node_count),
        posterior_gain=P_bar,
        coupling=coupling,
        noise_gain=noise_gain,
        joint_actual=joint,
        spectral_radius=spectral_radius(coupling),
    )


def steady_modified_ci(
    plant: PlantModel,
    weights: Array,
    C_tilde: Array,
    R_tilde: Array,
    sensors: SensorSuite,
    tol: float = DEFAULT_TOL,
    gamma: int = 0,
) -> SteadyStatePrediction:
    """
    Steady-state prediction for Modified CI.

    The reported covariance solves the HCRE with information
    ``C_tilde_i^T R_tilde_i^+ C_tilde_i`` and ``weights = L^gamma``; the actual
    error covariance is the diagonal of the joint Lyapunov solution.
    """
    M = C_tilde @ pinv_sym(R_tilde)
    H = _modified_information(C_tilde, R_tilde)
    return _ci_family(Algorithm.MCI_DIRECT, gamma, plant, sensors, weights, H, M, tol)


def steady_ckf(
    plant: PlantModel,
    sensors: SensorSuite,
    tol: float = DEFAULT_TOL,
) -> Array:
    """Steady prior covariance of the centralized filter."""
    C, R = sensors.stacked()
    return solve_dare(DareProblem(plant.A, C, plant.Q, R), tol)


def _ckf_prediction(
    plant: PlantModel,
    sensors: SensorSuite,
    node_count: int,
    gamma: int,
    tol: float,
) -> SteadyStatePrediction:
    P = np.repeat(steady_ckf(plant, sensors, tol)[None], node_count, axis=0)
    P_bar = inv_sym(inv_sym(P) + sensors.info_matrices.sum(axis=0))
    return SteadyStatePrediction(
        algorithm=Algorithm.CKF,
        gamma=gamma,
        prior_estimated=P,
        prior_actual=P,
        posterior_estimated=P_bar,
        posterior_actual=P_bar,
        posterior_gain=P_bar,
    )


def steady_state(
    algorithm: Algorithm,
    plant: PlantModel,
    sensors: SensorSuite,
    network: ConsensusNetwork,
    gamma: int,
    *,
    omega: float | None = None,
    tol: float = DEFAULT_TOL,
) -> SteadyStatePrediction:
    """
    Predict the steady covariances of ``algorithm`` on ``network``.

    Both QWS modes of a modified filter share one prediction, since each
    converges to the exact fused covariance.
    """
    node_count = network.node_count
    eye = np.repeat(np.eye(plant.dim)[None], node_count, axis=0)
    C_tilde, R_tilde = fused_observation(sensors, network, gamma)
    weights = network.power(gamma)
    match algorithm:
        case Algorithm.CKF:
            return _ckf_prediction(plant, sensors, node_count, gamma, tol)
        case Algorithm.CM:
            H = node_count * C_tilde
            P = _solve_nodes(
                lambda i: DareProblem.from_information(plant.A, plant.Q, H[i]),
                node_count,
                tol,
            )
            M = node_count * eye
            return _cm_family(algorithm, gamma, plant, P, H, M, R_tilde, tol)
        case Algorithm.MCM_DIRECT | Algorithm.MCM_STOCH:
            P = steady_modified_cm(plant, C_tilde, R_tilde, tol)
            H = _modified_information(C_tilde, R_tilde)
            M = C_tilde @ pinv_sym(R_tilde)
            return _cm_family(algorithm, gamma, plant, P, H, M, R_tilde, tol)
        case Algorithm.CI:
            return _ci_family(
                algorithm, gamma, plant, sensors, weights, C_tilde, eye, tol
            )
        case Algorithm.HCMCI:
            w = float(node_count) if omega is None else omega
            return _ci_family(
                algorithm, gamma, plant, sensors, weights, w * C_tilde, w * eye, tol
            )
        case Algorithm.MCI_DIRECT | Algorithm.MCI_STOCH:
            prediction = steady_modified_ci(
                plant, weights, C_tilde, R_tilde, sensors, tol, gamma
            )
            return replace(prediction, algorithm=algorithm)


def ci_bound(
    plant: PlantModel,
    sensors: SensorSuite,
    network: ConsensusNetwork,
    gamma: int,
    tol: float = DEFAULT_TOL,
) -> Array:
    """
    Steady prior covariance classical CI reports at every node.

    It upper-bounds the covariance Modified CI reports on the same network.
    """
    prediction = steady_state(Algorithm.CI, plant, sensors, network, gamma, tol=tol)
    return prediction.prior_estimated


@dataclass(frozen=True)
class OrderPreservationReport:
    """Outcome of an order preservation check over problem pairs."""

    checked: int
    violations: int
    worst_margin: float
    """Smallest ``min eig(P_1 - P_2)`` seen."""


def property_order_preservation(
    pairs: Iterable[tuple[DareProblem, DareProblem] | tuple[HcreProblem, HcreProblem]],
    slack: float = 1e-9,
) -> OrderPreservationReport:
    """
    Check that larger ``(Q, R)`` give larger solutions.

    Each pair must list the problem with the larger noise first.
    """
    checked = violations = 0
    worst = np.inf
    for larger, smaller in pairs:
        if isinstance(larger, DareProblem) and isinstance(smaller, DareProblem):
            margin = float(min_eig(solve_dare(larger) - solve_dare(smaller)))
        elif isinstance(larger, HcreProblem) and isinstance(smaller, HcreProblem):
            margin = float(np.min(min_eig(solve_hcre(larger) - solve_hcre(smaller))))
        else:
            msg = "pairs must hold two problems of the same kind"
            raise TypeError(msg)
        checked += 1
        worst = min(worst, margin)
        if margin < -slack:
            violations += 1
            logger.warning("Order preservation violated (margin %.3e)", margin)
    return OrderPreservationReport(
        checked=checked, violations=violations, worst_margin=float(worst)
    )


def _random_spd(rng: np.random.Generator, n: int) -> Array:
    B = rng.standard_normal((n, n))
    return B @ B.T + 0.1 * np.eye(n)


def _random_psd(rng: np.random.Generator, n: int) -> Array:
    B = rng.standard_normal((n, n))
    return B @ B.T


def _random_dynamics(rng: np.random.Generator, n: int) -> Array:
    A = rng.standard_normal((n, n))
    return A * (rng.uniform(0.5, 1.2) / max(spectral_radius(A), 1e-3))


def random_ordered_dare_pairs(
    count: int,
    rng: np.random.Generator,
    max_dim: int = 4,
) -> list[tuple[DareProblem, DareProblem]]:
    """Draw DARE pairs with ``Q_1 >= Q_2`` and ``R_1 >= R_2``."""
    pairs = []
    for _ in range(count):
        n = int(rng.integers(1, max_dim + 1))
        A = _random_dynamics(rng, n)
        C = rng.standard_normal((n, n))
        Q2, R2 = _random_spd(rng, n), _random_spd(rng, n)
        Q1, R1 = Q2 + _random_psd(rng, n), R2 + _random_psd(rng, n)
        pairs.append((DareProblem(A, C, Q1, R1), DareProblem(A, C, Q2, R2)))
    return pairs


def random_ordered_hcre_pairs(
    count: int,
    rng: np.random.Generator,
    max_dim: int = 4,
    node_count: int = 3,
) -> list[tuple[HcreProblem, HcreProblem]]:
    """Draw HCRE pairs on a path graph with ordered ``Q`` and ``R_i``."""
    path = [(i, i + 1) for i in range(node_count - 1)]
    weights = metropolis_weights(path, node_count)
    pairs = []
    for _ in range(count):
        n = int(rng.integers(1, max_dim + 1))
        A = _random_dynamics(rng, n)
        C = [rng.standard_normal((n, n)) for _ in range(node_count)]
        Q2 = _random_spd(rng, n)
        R2 = [_random_spd(rng, n) for _ in range(node_count)]
        Q1 = Q2 + _random_psd(rng, n)
        R1 = [r + _random_psd(rng, n) for r in R2]
        pairs.append(
            (
                HcreProblem.from_sensors(A, Q1, C, R1, weights),
                HcreProblem.from_sensors(A, Q2, C, R2, weights),
            )
        )
    return pairs


@dataclass(frozen=True)
class ConvergentParameterReport:
    """Distance between a time-varying recursion and the constant fixed point."""

    steps: int
    final_gap: float
    converged: bool


def property_convergent_parameter(
    problem: DareProblem | HcreProblem,
    R_sequence: Callable[[int], Array | Sequence[Array]],
    steps: int = 2000,
    tol: float = 1e-6,
) -> ConvergentParameterReport:
    """
    Run the recursion with ``R_k = R_sequence(k)`` and compare with the fixed point.

    For an HCRE problem ``R_sequence`` returns one noise covariance per node and
    the problem must carry its ``C_i``.
    """
    A, Q = problem.A, problem.Q
    if isinstance(problem, DareProblem):
        limit = solve_dare(problem)
        P = Q
        for k in range(1, steps + 1):
            H = problem.C.T @ inv_sym(as_matrix(R_sequence(k))) @ problem.C
            P = dare_step(A, Q, H, P)
    else:
        if problem.C is None:
            msg = "the HCRE problem must carry its observation matrices"
            raise ValueError(msg)
        limit = solve_hcre(problem)
        P = np.broadcast_to(Q, problem.information.shape)
        for k in range(1, steps + 1):
            H = np.stack(
                [
                    c.T @ inv_sym(as_matrix(r)) @ c
                    for c, r in zip(problem.C, R_sequence(k), strict=True)
                ]
            )
            P = hcre_step(A, Q, problem.weights, H, P)
    gap = float(np.max(np.linalg.norm(P - limit, axis=(-2, -1))))
    return ConvergentParameterReport(steps=steps, final_gap=gap, converged=gap < tol)


@dataclass(frozen=True)
class ContinuityReport:
    """Empirical sensitivity of the DARE solution to a noise perturbation."""

    perturbation: float
    change: float

    @property
    def modulus(self) -> float:
        """``change / perturbation``."""
        return self.change / self.perturbation


def continuity_modulus(problem: DareProblem, delta: Array) -> ContinuityReport:
    """Solve with ``R + delta`` and record how far the solution moves."""
    delta = symmetrize(as_matrix(delta))
    perturbed = DareProblem(problem.A, problem.C, problem.Q, problem.R + delta)
    change = float(np.linalg.norm(solve_dare(perturbed) - solve_dare(problem)))
    return ContinuityReport(perturbation=float(np.linalg.norm(delta)), change=change)
