import numpy as np

from consensus_dkf.filters import Algorithm, ckf_step, initial_state
from consensus_dkf.system import PlantModel, SensorSuite, Trajectory


def test_matches_covariance_form(
    plant: PlantModel, sensors: SensorSuite, trajectories: list[Trajectory]
) -> None:
    """The information form agrees with the gain form of the Kalman filter."""
    trajectory = trajectories[0]
    measurements = sensors.info_vectors(trajectory)
    C, R = sensors.stacked()
    y = np.hstack(trajectory.measurements)
    state = initial_state(Algorithm.CKF, plant, 1, 8)
    x, P = plant.x0_mean, plant.P0
    for k in range(trajectory.steps):
        state = ckf_step(state, measurements[None, k], plant, sensors)
        x, P = plant.A @ x, plant.A @ P @ plant.A.T + plant.Q
        gain = P @ C.T @ np.linalg.inv(C @ P @ C.T + R)
        x = x + gain @ (y[k] - C @ x)
        P = (np.eye(4) - gain @ C) @ P
        np.testing.assert_allclose(state.x_post[0, 3], x, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(state.P_post[0, 3], P, rtol=1e-6, atol=1e-10)


def test_nodes_agree(
    plant: PlantModel, sensors: SensorSuite, trajectories: list[Trajectory]
) -> None:
    """Every node carries the centralized estimate."""
    measurements = np.stack([sensors.info_vectors(t) for t in trajectories])
    state = initial_state(Algorithm.CKF, plant, len(trajectories), 8)
    for k in range(5):
        state = ckf_step(state, measurements[:, k], plant, sensors)
    np.testing.assert_array_equal(
        state.x_post, np.broadcast_to(state.x_post[:, :1], state.x_post.shape)
    )
    assert state.step == 5
