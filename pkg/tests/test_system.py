import numpy as np
import pytest

from consensus_dkf.errors import UnobservableError
from consensus_dkf.network import ConsensusNetwork
from consensus_dkf.system import (
    PlantModel,
    SensorSuite,
    default_node_types,
    make_tracking_model,
    make_tracking_sensors,
    sample_gaussian,
    simulate,
    simulate_batch,
    tracking_sensor,
)


def test_tracking_model(plant: PlantModel) -> None:
    """The plant is a planar constant-velocity model."""
    assert plant.dim == 4
    assert plant.invertible
    np.testing.assert_allclose(plant.A[:2, :2], [[1.0, 0.1], [0.0, 1.0]])
    np.testing.assert_allclose(plant.Q[0, 0], 0.1**3 / 3)
    np.testing.assert_allclose(plant.Q[0, 2], 0.5 * 0.1**3 / 3)
    np.testing.assert_allclose(plant.P0, 100.0 * np.eye(4))
    np.testing.assert_allclose(plant.x0_mean, [150.0, 0.0, 150.0, 0.0])


def test_plant_validation() -> None:
    """Bad shapes and covariances are rejected."""
    with pytest.raises(ValueError, match="square"):
        PlantModel(np.ones((2, 3)), np.eye(2), np.zeros(2), np.eye(2))
    with pytest.raises(ValueError, match="positive definite"):
        PlantModel(np.eye(2), np.zeros((2, 2)), np.zeros(2), np.eye(2))
    with pytest.raises(ValueError, match="x0_mean"):
        PlantModel(np.eye(2), np.eye(2), np.zeros(3), np.eye(2))
    with pytest.raises(ValueError, match="sampling interval"):
        make_tracking_model(0.0)


def test_tracking_sensor_types() -> None:
    """Types one and two see a position; type three sees nothing."""
    c1, r1 = tracking_sensor(1)
    c3, r3 = tracking_sensor(3)
    np.testing.assert_array_equal(c1, [[1.0, 0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(r1, [[0.01]])
    assert not np.any(c3)
    assert r3[0, 0] > 0.0
    with pytest.raises(ValueError, match="unknown sensor type"):
        tracking_sensor(4)


def test_default_node_types() -> None:
    """Types cycle over the nodes."""
    assert default_node_types(7) == [1, 2, 3, 1, 2, 3, 1]


def test_collective_observability() -> None:
    """One position coordinate is not enough, both are."""
    with pytest.raises(UnobservableError, match="collectively unobservable"):
        make_tracking_sensors([1, 1, 3])
    suite = make_tracking_sensors([1, 2, 3])
    assert suite.observable
    assert suite.node_types == (1, 2, 3)


def test_info_matrices(sensors: SensorSuite) -> None:
    """The information form is ``C^T R^-1 C`` per node."""
    x1 = np.zeros((4, 4))
    x1[0, 0] = 100.0
    np.testing.assert_allclose(sensors.info_matrices[0], x1)
    np.testing.assert_allclose(sensors.info_matrices[2], 0.0)
    assert sensors.info_matrices.shape == (8, 4, 4)


def test_stacked(sensors: SensorSuite) -> None:
    """Stacked observations pair with a block diagonal noise."""
    C, R = sensors.stacked()
    assert C.shape == (8, 4)
    assert R.shape == (8, 8)
    np.testing.assert_allclose(C.T @ np.linalg.inv(R) @ C, sensors.info_matrices.sum(0))


def test_stacked_factor(sensors: SensorSuite, circle: ConsensusNetwork) -> None:
    """The stacked factor squares to the weighted sum with squared weights."""
    row = circle.power(3)[1]
    F = sensors.stacked_factor(row)
    expected = np.einsum("j,jab->ab", row**2, sensors.info_matrices)
    np.testing.assert_allclose(F.T @ F, expected, atol=1e-10)


def test_sample_gaussian_rank_deficient(rng: np.random.Generator) -> None:
    """Samples of a singular covariance stay in its range."""
    cov = np.diag([4.0, 0.0])
    draws = sample_gaussian([1.0, 2.0], cov, rng, size=500)
    assert draws.shape == (500, 2)
    np.testing.assert_allclose(draws[:, 1], 2.0)
    assert np.std(draws[:, 0]) == pytest.approx(2.0, rel=0.15)


def test_simulate_draw_order(plant: PlantModel) -> None:
    """States and measurements come from one generator in a fixed order."""
    sensors = make_tracking_sensors([1, 2])
    trajectory = simulate(plant, sensors, 5, 11)
    rng = np.random.default_rng(11)
    x0 = sample_gaussian(plant.x0_mean, plant.P0, rng)
    noise = sample_gaussian(np.zeros(4), plant.Q, rng, size=5)
    np.testing.assert_array_equal(trajectory.states[0], x0)
    np.testing.assert_allclose(trajectory.states[1], plant.A @ x0 + noise[0])
    v1 = sample_gaussian(np.zeros(1), sensors.R[0], rng, size=5)
    np.testing.assert_allclose(
        trajectory.measurements[0], trajectory.states[1:, :1] + v1
    )
    assert trajectory.steps == 5
    assert trajectory.rng_seed == 11


def test_simulate_reproducible(plant: PlantModel, sensors: SensorSuite) -> None:
    """The same seed gives the same trajectory."""
    a, b = simulate_batch(plant, sensors, 10, [4, 4])
    np.testing.assert_array_equal(a.states, b.states)
    for ya, yb in zip(a.measurements, b.measurements, strict=True):
        np.testing.assert_array_equal(ya, yb)
    with pytest.raises(ValueError, match="steps"):
        simulate(plant, sensors, 0, 1)


def test_info_vectors(plant: PlantModel, sensors: SensorSuite) -> None:
    """Normalized measurements have shape (steps, nodes, dim)."""
    trajectory = simulate(plant, sensors, 6, 2)
    z = sensors.info_vectors(trajectory)
    assert z.shape == (6, 8, 4)
    np.testing.assert_allclose(z[:, 0, 0], 100.0 * trajectory.measurements[0][:, 0])
    np.testing.assert_allclose(z[:, 2], 0.0)
