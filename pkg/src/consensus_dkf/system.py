"""The LTI plant, heterogeneous sensors and trajectory simulation."""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from numpy.typing import ArrayLike

from .errors import UnobservableError
from .utils import (
    Array,
    as_matrix,
    check_symmetric,
    inv_sym,
    is_observable,
    min_eig,
    psd_sqrt,
    symmetrize,
)

TRACKING_DIM = 4
POSITION_NOISE = 0.01
NAIVE_NOISE = 1e6


def _check_positive_definite(m: Array, name: str) -> None:
    check_symmetric(m, name=name)
    if float(min_eig(m)) <= 0.0:
        msg = f"{name} must be positive definite"
        raise ValueError(msg)


@dataclass(frozen=True, eq=False)
class PlantModel:
    """``x_{k+1} = A x_k + w_k`` with ``w_k ~ N(0, Q)`` and ``x_0 ~ N(x0_mean, P0)``."""

    A: Array
    Q: Array
    x0_mean: Array
    P0: Array
    invertible: bool = field(init=False)

    def __post_init__(self) -> None:
        """Validate shapes and covariances, and record whether A is invertible."""
        A = as_matrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            msg = "A must be square"
            raise ValueError(msg)
        x0_mean = np.asarray(self.x0_mean, dtype=np.float64).reshape(-1)
        if x0_mean.shape != (n,):
            msg = f"x0_mean must have {n} entries"
            raise ValueError(msg)
        Q, P0 = as_matrix(self.Q), as_matrix(self.P0)
        _check_positive_definite(Q, "Q")
        _check_positive_definite(P0, "P0")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "x0_mean", x0_mean)
        s = np.linalg.svd(A, compute_uv=False)
        object.__setattr__(self, "invertible", bool(s[-1] > 1e-12 * s[0]))

    @property
    def dim(self) -> int:
        """The state dimension."""
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class SensorSuite:
    """Per-node observation matrices ``C_i`` and noise covariances ``R_i``."""

    C: tuple[Array, ...]
    R: tuple[Array, ...]
    node_types: tuple[int, ...] = ()
    observable: bool | None = None
    """Collective observability, when it was checked against a plant."""
    info_matrices: Array = field(init=False, repr=False)
    """``C_i^T R_i^-1 C_i`` stacked over nodes."""
    info_gains: tuple[Array, ...] = field(init=False, repr=False)
    """``C_i^T R_i^-1`` per node."""

    def __post_init__(self) -> None:
        """Validate the per-node blocks and precompute the information form."""
        C = tuple(as_matrix(c) for c in self.C)
        R = tuple(as_matrix(r) for r in self.R)
        if not C or len(C) != len(R):
            msg = "every node needs one observation matrix and one noise covariance"
            raise ValueError(msg)
        n = C[0].shape[1]
        gains: list[Array] = []
        for i, (c, r) in enumerate(zip(C, R, strict=True)):
            if c.shape[1] != n or r.shape != (c.shape[0], c.shape[0]):
                msg = f"node {i + 1} has inconsistent sensor dimensions"
                raise ValueError(msg)
            _check_positive_definite(r, f"R_{i + 1}")
            gains.append(c.T @ inv_sym(r))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "node_types", tuple(self.node_types))
        object.__setattr__(self, "info_gains", tuple(gains))
        info = np.stack([g @ c for g, c in zip(gains, C, strict=True)])
        object.__setattr__(self, "info_matrices", symmetrize(info))

    @property
    def node_count(self) -> int:
        """The number of nodes."""
        return len(self.C)

    @property
    def dim(self) -> int:
        """The state dimension."""
        return self.C[0].shape[1]

    def collectively_observable(self, A: Array) -> bool:
        """Whether ``(A, col_i(C_i))`` is observable."""
        return is_observable(A, np.vstack(self.C))

    def stacked(self) -> tuple[Array, Array]:
        """Return the stacked observation matrix and block diagonal noise covariance."""
        return np.vstack(self.C), la.block_diag(*self.R)

    def stacked_factor(self, row_weights: Array) -> Array:
        """Return ``col_j(l_j R_j^(-1/2) C_j)`` for one row of consensus weights."""
        blocks = [
            w * inv_sym(psd_sqrt(r)) @ c
            for w, c, r in zip(row_weights, self.C, self.R, strict=True)
        ]
        return np.vstack(blocks)

    def info_vectors(self, trajectory: "Trajectory") -> Array:
        """Return ``C_i^T R_i^-1 y_{i,k}`` with shape ``(steps, nodes, dim)``."""
        return np.stack(
            [
                y @ g.T
                for g, y in zip(self.info_gains, trajectory.measurements, strict=True)
            ],
            axis=1,
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``x_0..x_K`` and measurements ``y_{i,1..K}`` of one simulated run."""

    states: Array
    measurements: tuple[Array, ...]
    rng_seed: int

    @property
    def steps(self) -> int:
        """The number of measurement steps."""
        return self.states.shape[0] - 1


def sample_gaussian(
    mean: ArrayLike,
    cov: ArrayLike,
    rng: np.random.Generator,
    size: int | None = None,
) -> Array:
    """
    Draw from ``N(mean, cov)`` using the symmetric square root of ``cov``.

    Rank deficient covariances are supported; samples stay on the mean plus the
    range of ``cov``. With ``size`` the result has a leading sample axis.
    """
    cov = as_matrix(cov)
    check_symmetric(cov, name="covariance")
    factor = psd_sqrt(cov)
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    shape = (cov.shape[0],) if size is None else (size, cov.shape[0])
    return mean + rng.standard_normal(shape) @ factor.T


def make_tracking_model(
    T: float,
    x0_mean: Sequence[float] = (150.0, 0.0, 150.0, 0.0),
    p0_scale: float = 100.0,
) -> PlantModel:
    """Planar constant-velocity target with state ``[p_x, v_x, p_y, v_y]``."""
    if T <= 0.0:
        msg = f"sampling interval must be positive, got {T}"
        raise ValueError(msg)
    a = np.array([[1.0, T], [0.0, 1.0]])
    g = np.array([[T**3 / 3.0, T**2 / 2.0], [T**2 / 2.0, T]])
    return PlantModel(
        A=la.block_diag(a, a),
        Q=np.block([[g, 0.5 * g], [0.5 * g, g]]),
        x0_mean=np.asarray(x0_mean, dtype=np.float64),
        P0=p0_scale * np.eye(TRACKING_DIM),
    )


def default_node_types(node_count: int) -> list[int]:
    """Cycle the sensor types 1, 2, 3 over the nodes."""
    return [i % 3 + 1 for i in range(node_count)]


def tracking_sensor(kind: int) -> tuple[Array, Array]:
    """Return ``(C, R)`` for sensor type 1 (x position), 2 (y position) or 3 (none)."""
    match kind:
        case 1:
            return np.array([[1.0, 0.0, 0.0, 0.0]]), np.array([[POSITION_NOISE]])
        case 2:
            return np.array([[0.0, 0.0, 1.0, 0.0]]), np.array([[POSITION_NOISE]])
        case 3:
            return np.zeros((1, TRACKING_DIM)), np.array([[NAIVE_NOISE]])
        case _:
            msg = f"unknown sensor type: {kind}"
            raise ValueError(msg)


def make_tracking_sensors(
    type_assignment: Iterable[int],
    T: float = 0.1,
) -> SensorSuite:
    """Build the tracking sensor suite and check collective observability."""
    types = tuple(int(t) for t in type_assignment)
    blocks = [tracking_sensor(t) for t in types]
    suite = SensorSuite(tuple(c for c, _ in blocks), tuple(r for _, r in blocks), types)
    A = make_tracking_model(T).A
    if not suite.collectively_observable(A):
        msg = "collectively unobservable"
        raise UnobservableError(msg)
    return SensorSuite(suite.C, suite.R, types, observable=True)


def simulate(
    plant: PlantModel,
    sensors: SensorSuite,
    steps: int,
    rng_seed: int,
) -> Trajectory:
    """
    Simulate ``steps`` transitions and the measurements taken after each.

    Draws come from one seeded generator in a fixed order: the initial state,
    the process noise, then each node's measurement noise.
    """
    if steps < 1:
        msg = "steps must be at least 1"
        raise ValueError(msg)
    if sensors.dim != plant.dim:
        msg = "sensor and plant dimensions differ"
        raise ValueError(msg)
    rng = np.random.default_rng(rng_seed)
    states = np.empty((steps + 1, plant.dim))
    states[0] = sample_gaussian(plant.x0_mean, plant.P0, rng)
    noise = sample_gaussian(np.zeros(plant.dim), plant.Q, rng, size=steps)
    for k in range(steps):
        states[k + 1] = plant.A @ states[k] + noise[k]
    measurements = tuple(
        states[1:] @ c.T + sample_gaussian(np.zeros(r.shape[0]), r, rng, size=steps)
        for c, r in zip(sensors.C, sensors.R, strict=True)
    )
    return Trajectory(states=states, measurements=measurements, rng_seed=rng_seed)


def simulate_batch(
    plant: PlantModel,
    sensors: SensorSuite,
    steps: int,
    seeds: Iterable[int],
) -> list[Trajectory]:
    """Simulate one trajectory per seed."""
    return [simulate(plant, sensors, steps, seed) for seed in seeds]
