import numpy as np
import pytest

from core.errors import ContractViolationError, ModelDomainError, SimulationDivergedError
from core.noise_models import GaussianNoise, UniformBoxNoise
from core.sds_sim import (
    ObservationKind,
    ObservationModel,
    SystemModel,
    check_support_diameter,
    initial_state,
    observe,
    random_covariance,
    random_matrix,
    replay,
    seeded_trajectory,
    simulate,
)


def _logistic(state, input_):
    return 0.5 * np.tanh(state)


@pytest.fixture
def noise_2d():
    return GaussianNoise([0.0, 0.0], np.eye(2))


@pytest.fixture
def system_2d(noise_2d):
    return SystemModel.linear([[0.5, 0.1], [0.0, 0.8]], noise_2d)


class TestSystemModel:
    def test_linear_step(self, system_2d):
        np.testing.assert_allclose(system_2d.step_map(np.array([1.0, 1.0]), np.zeros(0)), [0.6, 0.8])

    def test_input_matrix(self, noise_2d):
        system = SystemModel.linear(np.eye(2), noise_2d, B=[[1.0], [2.0]], input_policy=lambda k: [float(k)])
        assert system.input_dim == 1
        np.testing.assert_allclose(system.step_map(np.zeros(2), system.input_at(3)), [3.0, 6.0])

    def test_zero_input_by_default(self, system_2d):
        assert system_2d.input_at(5).shape == (0,)

    def test_custom_dynamics(self):
        system = SystemModel(noise=GaussianNoise([0.0], [[1.0]]), dynamics=_logistic)
        assert not system.is_linear
        np.testing.assert_allclose(system.step_map(np.array([0.0]), np.zeros(0)), [0.0])

    def test_needs_exactly_one_dynamics(self, noise_2d):
        with pytest.raises(ModelDomainError):
            SystemModel(noise=noise_2d)
        with pytest.raises(ModelDomainError):
            SystemModel(noise=noise_2d, F=np.eye(2), dynamics=_logistic)

    def test_F_shape(self, noise_2d):
        with pytest.raises(ContractViolationError):
            SystemModel.linear(np.eye(3), noise_2d)

    def test_dynamics_shape_checked(self, noise_2d):
        system = SystemModel(noise=noise_2d, dynamics=lambda x, u: np.zeros(3))
        with pytest.raises(ContractViolationError):
            system.step_map(np.zeros(2), np.zeros(0))


class TestSimulate:
    def test_shapes(self, system_2d):
        traj = simulate(system_2d, [0.0, 0.0], 25, seed=1)
        assert traj.K == 25
        assert traj.states.shape == (25, 2)
        assert traj.noises.shape == (25, 2)
        assert traj.all_states.shape == (26, 2)

    def test_recursion_holds(self, system_2d):
        traj = simulate(system_2d, [1.0, -1.0], 50, seed=2)
        np.testing.assert_allclose(replay(system_2d, traj), traj.states, rtol=0, atol=1e-12)
        x_prev = traj.all_states[:-1]
        np.testing.assert_allclose(traj.states, x_prev @ system_2d.F.T + traj.noises, atol=1e-12)

    def test_same_seed_same_trajectory(self, system_2d):
        a = simulate(system_2d, [0.0, 0.0], 40, seed=7)
        b = simulate(system_2d, [0.0, 0.0], 40, seed=7)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.noises, b.noises)

    def test_different_seed_differs(self, system_2d):
        a = simulate(system_2d, [0.0, 0.0], 10, seed=7)
        b = simulate(system_2d, [0.0, 0.0], 10, seed=8)
        assert not np.array_equal(a.noises, b.noises)

    def test_noise_independent_of_dynamics(self, noise_2d, system_2d):
        other = SystemModel.linear(np.zeros((2, 2)), noise_2d)
        a = simulate(system_2d, [0.0, 0.0], 10, seed=3)
        b = simulate(other, [5.0, 5.0], 10, seed=3)
        np.testing.assert_array_equal(a.noises, b.noises)

    def test_records_are_read_only(self, system_2d):
        traj = simulate(system_2d, [0.0, 0.0], 5, seed=1)
        with pytest.raises(ValueError):
            traj.states[0, 0] = 1.0

    def test_divergence(self):
        system = SystemModel.linear([[10.0]], UniformBoxNoise([1.0], [0.5]))
        with pytest.raises(SimulationDivergedError) as info:
            simulate(system, [1.0], 100, seed=0)
        assert 10 <= info.value.step <= 14

    def test_invalid_arguments(self, system_2d):
        with pytest.raises(ContractViolationError):
            simulate(system_2d, [0.0, 0.0], 0, seed=1)
        with pytest.raises(ContractViolationError):
            simulate(system_2d, [0.0], 5, seed=1)

    def test_prefix(self, system_2d):
        traj = simulate(system_2d, [0.0, 0.0], 20, seed=4)
        head = traj.prefix(5)
        np.testing.assert_array_equal(head.noises, traj.noises[:5])
        with pytest.raises(ContractViolationError):
            traj.prefix(21)

    def test_seeded_trajectory_reproducible(self, system_2d):
        a = seeded_trajectory(system_2d, 30, seed=11, index=4)
        b = seeded_trajectory(system_2d, 30, seed=11, index=4)
        c = seeded_trajectory(system_2d, 30, seed=11, index=5)
        np.testing.assert_array_equal(a.states, b.states)
        assert a.seed == b.seed != c.seed
        assert not np.array_equal(a.initial_state, c.initial_state)


class TestObservation:
    def test_identity(self):
        rng = np.random.default_rng(0)
        y = observe(ObservationModel.identity(), np.array([1.0, 2.0]), None, rng)
        np.testing.assert_array_equal(y, [1.0, 2.0])
        assert ObservationModel.identity().is_complete

    def test_additive_gaussian(self):
        model = ObservationModel.additive_gaussian([[0.01]])
        assert not model.is_complete
        rng = np.random.default_rng(0)
        ys = np.array([observe(model, np.array([3.0]), None, rng)[0] for _ in range(2000)])
        assert ys.mean() == pytest.approx(3.0, abs=0.01)
        assert ys.std() == pytest.approx(0.1, abs=0.01)

    def test_additive_gaussian_needs_cov(self):
        with pytest.raises(ModelDomainError):
            ObservationModel(ObservationKind.ADDITIVE_GAUSSIAN)


class TestRandomParts:
    def test_random_matrix_spectral_radius(self):
        F = random_matrix(4, seed=3, spectral_radius=0.9)
        assert float(np.max(np.abs(np.linalg.eigvals(F)))) == pytest.approx(0.9)
        np.testing.assert_array_equal(F, random_matrix(4, seed=3, spectral_radius=0.9))

    def test_random_covariance(self):
        S = random_covariance(3, seed=5)
        np.testing.assert_array_equal(S, S.T)
        eigenvalues = np.linalg.eigvalsh(S)
        assert eigenvalues.max() == pytest.approx(1.0)
        assert eigenvalues.min() > 0.0

    def test_initial_state_seeded(self):
        np.testing.assert_array_equal(initial_state(3, 9), initial_state(3, 9))

    def test_support_diameter_regime(self):
        assert check_support_diameter(GaussianNoise([0.0], [[1.0]]), 0.1)
        assert not check_support_diameter(UniformBoxNoise([0.0], [0.05]), 0.1)
        assert check_support_diameter(UniformBoxNoise([0.0], [0.2]), 0.1)
