import numpy as np
import pytest
import scipy.linalg as la

from consensus_dkf.errors import (
    ConvergenceError,
    RangeMismatchError,
    UnobservableError,
    UnstableLyapunovError,
)
from consensus_dkf.models import Algorithm
from consensus_dkf.network import ConsensusNetwork, build_random_geometric
from consensus_dkf.riccati import (
    DareProblem,
    HcreProblem,
    block_noise,
    breve_R,
    ci_bound,
    continuity_modulus,
    dare_residual,
    fused_observation,
    hcre_residual,
    property_convergent_parameter,
    property_order_preservation,
    random_ordered_dare_pairs,
    random_ordered_hcre_pairs,
    solve_dare,
    solve_hcre,
    solve_lyapunov,
    steady_ckf,
    steady_state,
)
from consensus_dkf.system import (
    PlantModel,
    SensorSuite,
    default_node_types,
    make_tracking_sensors,
)
from consensus_dkf.utils import min_eig, pinv_sym


def scalar_problem() -> DareProblem:
    """``A = C = Q = R = 1``."""
    one = np.eye(1)
    return DareProblem(one, one, one, one)


def test_scalar_dare() -> None:
    """The scalar problem's solution is the golden ratio."""
    P = solve_dare(scalar_problem())
    assert P[0, 0] == pytest.approx((1 + np.sqrt(5)) / 2, abs=1e-10)
    assert dare_residual(scalar_problem(), P) < 1e-10


def test_dare_matches_scipy(rng: np.random.Generator) -> None:
    """The fixed point agrees with the dual control DARE."""
    A = rng.standard_normal((3, 3))
    A *= 0.9 / max(abs(np.linalg.eigvals(A)))
    C = rng.standard_normal((2, 3))
    Q = np.eye(3)
    R = np.diag([0.5, 2.0])
    P = solve_dare(DareProblem(A, C, Q, R))
    np.testing.assert_allclose(P, la.solve_discrete_are(A.T, C.T, Q, R), atol=1e-8)


def test_dare_validation() -> None:
    """Bad problems are rejected up front."""
    one = np.eye(1)
    with pytest.raises(UnobservableError):
        DareProblem(one, np.zeros((1, 1)), one, one)
    with pytest.raises(ValueError, match="positive definite"):
        DareProblem(one, one, np.zeros((1, 1)), one)
    with pytest.raises(ValueError, match="dimensions"):
        DareProblem(np.eye(2), one, np.eye(2), one)


def test_dare_max_iter() -> None:
    """Running out of iterations raises."""
    with pytest.raises(ConvergenceError):
        solve_dare(scalar_problem(), max_iter=2)


def test_from_information() -> None:
    """An information-form problem has the requested information term."""
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    problem = DareProblem.from_information(np.eye(2), np.eye(2), H)
    np.testing.assert_allclose(problem.information, H, atol=1e-12)


def test_lyapunov_matches_scipy(rng: np.random.Generator) -> None:
    """The Lyapunov iteration agrees with scipy."""
    F = rng.standard_normal((4, 4))
    F *= 0.8 / max(abs(np.linalg.eigvals(F)))
    W = np.diag([1.0, 2.0, 0.5, 1.5])
    np.testing.assert_allclose(
        solve_lyapunov(F, W), la.solve_discrete_lyapunov(F, W), atol=1e-8
    )
    with pytest.raises(UnstableLyapunovError):
        solve_lyapunov(1.1 * np.eye(2), np.eye(2))


def test_hcre_single_node_is_dare() -> None:
    """One node with unit weight reduces to the DARE."""
    one = np.eye(1)
    P = solve_hcre(HcreProblem(one, one, one, one[None]))
    assert P[0, 0, 0] == pytest.approx((1 + np.sqrt(5)) / 2, abs=1e-10)


def test_hcre_tracking(
    plant: PlantModel, sensors: SensorSuite, circle: ConsensusNetwork
) -> None:
    """The tracking problem on the ring solves to a small residual."""
    problem = HcreProblem(plant.A, plant.Q, circle.weights, sensors.info_matrices)
    P = solve_hcre(problem)
    assert P.shape == (8, 4, 4)
    assert np.all(hcre_residual(problem, P) < 1e-8)
    assert np.all(min_eig(P) > 0.0)


def test_hcre_validation(plant: PlantModel, sensors: SensorSuite) -> None:
    """Singular dynamics, bad weights and blind networks are rejected."""
    weights = np.full((8, 8), 1 / 8)
    with pytest.raises(ValueError, match="invertible"):
        HcreProblem(np.zeros((4, 4)), plant.Q, weights, sensors.info_matrices)
    with pytest.raises(ValueError, match="row stochastic"):
        HcreProblem(plant.A, plant.Q, 2 * weights, sensors.info_matrices)
    with pytest.raises(UnobservableError):
        HcreProblem(plant.A, plant.Q, weights, np.zeros((8, 4, 4)))


def test_order_preservation(rng: np.random.Generator) -> None:
    """Larger noise never yields a smaller solution."""
    dare = property_order_preservation(random_ordered_dare_pairs(40, rng))
    assert dare.checked == 40
    assert dare.violations == 0
    hcre = property_order_preservation(random_ordered_hcre_pairs(15, rng))
    assert hcre.checked == 15
    assert hcre.violations == 0
    assert hcre.worst_margin >= -1e-9


def test_order_preservation_mixed_pair() -> None:
    """Pairs must be of one kind."""
    one = np.eye(1)
    pair = (scalar_problem(), HcreProblem(one, one, one, one[None]))
    with pytest.raises(TypeError):
        property_order_preservation([pair])  # pyright: ignore[reportArgumentType]


def test_convergent_parameter() -> None:
    """A noise sequence converging to ``R`` drives the DARR to the fixed point."""
    report = property_convergent_parameter(
        scalar_problem(), lambda k: np.eye(1) * (1 + 0.5**k), steps=200
    )
    assert report.converged


def test_convergent_parameter_hcre(rng: np.random.Generator) -> None:
    """The same holds node by node for the HCRR."""
    (problem, _), *_ = random_ordered_hcre_pairs(1, rng, max_dim=2)
    assert problem.R is not None
    base = problem.R
    report = property_convergent_parameter(
        problem, lambda k: [r + 0.5**k * np.eye(r.shape[0]) for r in base], steps=400
    )
    assert report.converged
    without_c = HcreProblem(problem.A, problem.Q, problem.weights, problem.information)
    with pytest.raises(ValueError, match="observation matrices"):
        property_convergent_parameter(without_c, lambda k: base)


def test_continuity_modulus() -> None:
    """Small noise changes move the solution a bounded amount."""
    report = continuity_modulus(scalar_problem(), 1e-4 * np.eye(1))
    assert report.perturbation == pytest.approx(1e-4)
    assert 0.0 < report.modulus < 1.0


def test_breve_r() -> None:
    """Zero eigenvalues are padded while the information term is kept."""
    R_tilde = np.diag([2.0, 0.0])
    C_tilde = np.diag([1.0, 0.0])
    R_breve = breve_R(C_tilde, R_tilde)
    np.testing.assert_allclose(R_breve, np.diag([2.0, 1.0]), atol=1e-12)
    np.testing.assert_allclose(
        C_tilde @ np.linalg.inv(R_breve) @ C_tilde, np.diag([0.5, 0.0]), atol=1e-12
    )
    factor = np.array([[np.sqrt(2.0), 0.0]])
    np.testing.assert_allclose(
        breve_R(C_tilde, R_tilde, stacked_factor=factor), R_breve, atol=1e-12
    )
    full = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(breve_R(C_tilde, full), full)
    with pytest.raises(RangeMismatchError):
        breve_R(np.ones((2, 2)), R_tilde)


@pytest.mark.parametrize("gamma", [1, 2, 3])
def test_breve_r_tracking_network(
    sensors: SensorSuite, circle: ConsensusNetwork, gamma: int
) -> None:
    """On the tracking ring the padded covariance keeps every fused information term."""
    C_tilde, R_tilde = fused_observation(sensors, circle, gamma)
    weights = circle.power(gamma)
    for i in range(circle.node_count):
        assert np.linalg.matrix_rank(R_tilde[i]) < 4
        expected = C_tilde[i].T @ pinv_sym(R_tilde[i]) @ C_tilde[i]
        scale = np.linalg.norm(expected)
        for R_breve in (
            breve_R(C_tilde[i], R_tilde[i]),
            breve_R(
                C_tilde[i],
                R_tilde[i],
                stacked_factor=sensors.stacked_factor(weights[i]),
            ),
        ):
            assert float(min_eig(R_breve)) > 0.0
            kept = C_tilde[i].T @ np.linalg.inv(R_breve) @ C_tilde[i]
            assert np.linalg.norm(kept - expected) <= 1e-9 * scale


def test_block_noise(sensors: SensorSuite) -> None:
    """Node noise covariances sit on the diagonal."""
    noise = block_noise(sensors)
    assert noise.shape == (8, 8)
    np.testing.assert_allclose(np.diag(noise)[:2], [0.01, 0.01])
    assert noise[2, 2] == 1e6


def test_joint_lyapunov_noise(
    plant: PlantModel, sensors: SensorSuite, circle: ConsensusNetwork
) -> None:
    """The joint error covariance solves its Lyapunov equation with node noises."""
    mci = steady_state(Algorithm.MCI_DIRECT, plant, sensors, circle, 2)
    assert mci.coupling is not None
    assert mci.noise_gain is not None
    assert mci.joint_actual is not None
    joint = mci.joint_actual
    rhs = (
        mci.coupling @ joint @ mci.coupling.T
        + mci.noise_gain @ block_noise(sensors) @ mci.noise_gain.T
        + np.kron(np.ones((8, 8)), plant.Q)
    )
    np.testing.assert_allclose(joint, rhs, atol=1e-7 * np.abs(joint).max())


def test_steady_ckf_shared(
    plant: PlantModel, sensors: SensorSuite, circle: ConsensusNetwork
) -> None:
    """The centralized prediction is consistent at every node."""
    prediction = steady_state(Algorithm.CKF, plant, sensors, circle, 2)
    for P in prediction.prior_estimated:
        np.testing.assert_allclose(P, steady_ckf(plant, sensors))
    np.testing.assert_allclose(prediction.consistency_margin, 0.0, atol=1e-12)


def test_steady_state_ordering(
    plant: PlantModel, sensors: SensorSuite, circle: ConsensusNetwork
) -> None:
    """CKF is best, CI bounds Modified CI, and modified CM is exactly consistent."""
    ckf = steady_ckf(plant, sensors)
    mci = steady_state(Algorithm.MCI_DIRECT, plant, sensors, circle, 2)
    bound = ci_bound(plant, sensors, circle, 2)
    assert np.all(min_eig(bound - mci.prior_estimated) > -1e-8)
    assert np.all(min_eig(mci.prior_estimated - ckf) > -1e-8)
    assert np.all(mci.consistency_margin > -1e-8)
    assert mci.spectral_radius is not None
    assert mci.spectral_radius < 1.0

    ci = steady_state(Algorithm.CI, plant, sensors, circle, 2)
    np.testing.assert_allclose(ci.prior_estimated, bound)
    assert np.all(ci.consistency_margin > -1e-8)

    mcm = steady_state(Algorithm.MCM_STOCH, plant, sensors, circle, 2)
    assert mcm.algorithm is Algorithm.MCM_STOCH
    scale = np.trace(mcm.prior_estimated, axis1=-2, axis2=-1)
    assert np.all(np.abs(mcm.consistency_margin) < 1e-6 * scale)


def test_hcmci_unit_gain_is_ci(
    plant: PlantModel, sensors: SensorSuite, circle: ConsensusNetwork
) -> None:
    """HCMCI with gain one predicts the same as CI."""
    hcmci = steady_state(Algorithm.HCMCI, plant, sensors, circle, 2, omega=1.0)
    ci = steady_state(Algorithm.CI, plant, sensors, circle, 2)
    np.testing.assert_allclose(hcmci.prior_estimated, ci.prior_estimated)
    np.testing.assert_allclose(hcmci.prior_actual, ci.prior_actual)


@pytest.mark.parametrize(
    "algorithm", [Algorithm.MCM_DIRECT, Algorithm.MCI_DIRECT, Algorithm.HCMCI]
)
def test_many_rounds_approach_ckf(
    plant: PlantModel,
    sensors: SensorSuite,
    circle: ConsensusNetwork,
    algorithm: Algorithm,
) -> None:
    """With many consensus rounds the prediction approaches the centralized one."""
    ckf = np.trace(steady_ckf(plant, sensors))
    prediction = steady_state(algorithm, plant, sensors, circle, 60)
    traces = np.trace(prediction.prior_estimated, axis1=-2, axis2=-1)
    np.testing.assert_allclose(traces, ckf, rtol=1e-3)


def test_ci_bound_covers_modified_ci_on_geometric_graph(plant: PlantModel) -> None:
    """Classical CI reports a larger covariance than Modified CI at every node."""
    network = build_random_geometric(20, 300.0, 100.0, 3)
    sensors = make_tracking_sensors(default_node_types(20))
    bound = ci_bound(plant, sensors, network, 4)
    mci = steady_state(Algorithm.MCI_DIRECT, plant, sensors, network, 4)
    margins = min_eig(bound - mci.prior_estimated)
    assert margins.shape == (20,)
    assert np.all(margins >= -1e-8)
