import numpy as np
import pytest
from scipy import stats

from core.errors import ContractViolationError, ModelDomainError
from core.noise_models import GaussianNoise, UniformBoxNoise
from core.predictors import (
    PredictorMode,
    PredictorSpec,
    deterministic_predictor,
    mean_predictor,
    mismatched_gaussian_predictor,
    optimal_predictor,
    predicted_state,
    step_score,
)
from core.sds_sim import ObservationModel, SystemModel


@pytest.fixture
def system_1d():
    return SystemModel.linear([[0.5]], GaussianNoise([0.0], [[1.0]]))


@pytest.fixture
def system_2d():
    return SystemModel.linear(np.eye(2) * 0.5, GaussianNoise([0.0, 0.0], np.eye(2)))


class TestConstruction:
    def test_optimal_uses_true_law(self, system_2d):
        pred = optimal_predictor(system_2d)
        assert pred.output_law() is system_2d.noise
        assert pred.mode == PredictorMode.STOCHASTIC
        assert pred.name == "optimal"

    def test_mismatch_law(self, system_2d):
        pred = mismatched_gaussian_predictor(system_2d, 0.5, 1.0)
        law = pred.output_law()
        np.testing.assert_allclose(law.mean, [0.5, 0.5])
        np.testing.assert_allclose(law.covariance, 2.0 * np.eye(2))
        assert pred.name == "mismatch(0.5, 1.0)"

    def test_mismatch_zero_is_optimal_law(self, system_2d):
        law = mismatched_gaussian_predictor(system_2d, 0.0, 0.0).output_law()
        np.testing.assert_array_equal(law.mean, system_2d.noise.mean)
        np.testing.assert_array_equal(law.covariance, system_2d.noise.covariance)

    def test_mismatch_needs_gaussian(self):
        system = SystemModel.linear([[0.5]], UniformBoxNoise([0.0], [1.0]))
        with pytest.raises(ModelDomainError):
            mismatched_gaussian_predictor(system, 0.1, 0.0)

    def test_mismatch_eta_domain(self, system_1d):
        with pytest.raises(ModelDomainError):
            mismatched_gaussian_predictor(system_1d, 0.0, -1.5)
        # eta = -1 leaves a singular covariance for unit variance
        with pytest.raises(ModelDomainError):
            mismatched_gaussian_predictor(system_1d, 0.0, -1.0)

    def test_deterministic(self, system_2d):
        pred = deterministic_predictor(system_2d, [0.1, -0.1])
        assert pred.is_deterministic
        assert pred.output_law() is None
        assert pred.dim == 2
        with pytest.raises(ContractViolationError):
            deterministic_predictor(system_2d, [0.0])

    def test_mean_predictor(self, system_2d):
        pred = mean_predictor(system_2d)
        assert pred.name == "mean"
        np.testing.assert_array_equal(pred.point, [0.0, 0.0])

    def test_spec_validation(self):
        with pytest.raises(ModelDomainError):
            PredictorSpec(ObservationModel.identity())
        with pytest.raises(ModelDomainError):
            PredictorSpec(ObservationModel.identity(), mode=PredictorMode.DETERMINISTIC)
        with pytest.raises(ModelDomainError):
            PredictorSpec(ObservationModel.identity(), mode=PredictorMode.DETERMINISTIC, point=[np.nan])


class TestPrediction:
    def test_predicted_state_deterministic(self, system_2d):
        pred = deterministic_predictor(system_2d, [1.0, 2.0])
        out = predicted_state(system_2d, pred, np.array([2.0, 2.0]), np.zeros(0), np.random.default_rng(0))
        np.testing.assert_allclose(out, [2.0, 3.0])

    def test_predicted_state_stochastic_draws(self, system_1d):
        pred = optimal_predictor(system_1d)
        rng = np.random.default_rng(1)
        draws = np.array([predicted_state(system_1d, pred, np.array([2.0]), np.zeros(0), rng)[0] for _ in range(5000)])
        assert draws.mean() == pytest.approx(1.0, abs=0.05)
        assert draws.std() == pytest.approx(1.0, abs=0.05)


class TestStepScore:
    def test_gaussian_score(self, system_1d):
        p, se = step_score(optimal_predictor(system_1d), [0.5], 0.1)
        assert p == pytest.approx(stats.norm.cdf(0.6) - stats.norm.cdf(0.4))
        assert se == 0.0

    def test_score_matches_empirical_frequency(self, system_1d):
        pred = optimal_predictor(system_1d)
        rng = np.random.default_rng(5)
        w = np.array([0.3])
        hits = np.mean([np.max(np.abs(pred.predict_noise(rng) - w)) <= 0.2 for _ in range(40_000)])
        p, _ = step_score(pred, w, 0.2)
        assert hits == pytest.approx(p, abs=0.01)

    def test_deterministic_hit_and_miss(self, system_1d):
        pred = deterministic_predictor(system_1d, [0.0])
        assert step_score(pred, [0.05], 0.1) == (1.0, 0.0)
        assert step_score(pred, [0.1], 0.1) == (1.0, 0.0)
        assert step_score(pred, [0.2], 0.1) == (0.0, 0.0)

    def test_uniform_zero_outside(self):
        system = SystemModel.linear([[0.5]], UniformBoxNoise([0.0], [1.0]))
        assert step_score(optimal_predictor(system), [1.5], 0.1)[0] == 0.0

    def test_mismatch_scores_lower_on_average(self, system_1d):
        noises = np.random.default_rng(2).standard_normal(2000)
        optimal = optimal_predictor(system_1d)
        shifted = mismatched_gaussian_predictor(system_1d, 1.0, 0.0)
        opt = np.mean([np.log(step_score(optimal, [w], 0.1)[0]) for w in noises])
        mis = np.mean([np.log(step_score(shifted, [w], 0.1)[0]) for w in noises])
        assert mis < opt

    def test_invalid(self, system_2d):
        pred = optimal_predictor(system_2d)
        with pytest.raises(ContractViolationError):
            step_score(pred, [0.0, 0.0], 0.0)
        with pytest.raises(ContractViolationError):
            step_score(pred, [0.0], 0.1)
