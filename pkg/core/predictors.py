"""Predictors declared through their per-step output law over the noise prediction.

A predictor outputs x_hat_{k+1} = f(x_k, u_k) + w_hat_k. Under complete
observation only the law of w_hat_k matters for scoring, so every predictor
is described by that law (stochastic mode) or by a fixed point
(deterministic mode, a point mass).

Architecture: Pure NumPy. No I/O.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_MC_BUDGET
from core.errors import ContractViolationError, ModelDomainError
from core.noise_models import GaussianNoise, NoiseModel
from core.sds_sim import ObservationModel, SystemModel


class PredictorMode(Enum):
    """How w_hat_k is produced."""
    STOCHASTIC = "stochastic"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True, eq=False)
class PredictorSpec:
    """Observation model plus the predictor's output law over w_hat_k.

    The law is history independent for every predictor built here, which
    keeps the output at step k free of any dependence on w_k.
    """
    observation: ObservationModel
    law: Optional[NoiseModel] = None
    mode: PredictorMode = PredictorMode.STOCHASTIC
    point: Optional[np.ndarray] = None
    name: str = "predictor"

    def __post_init__(self):
        if self.mode == PredictorMode.STOCHASTIC:
            if self.law is None:
                raise ModelDomainError("a stochastic predictor needs an output law")
        else:
            if self.point is None:
                raise ModelDomainError("a deterministic predictor needs a point")
            point = np.array(self.point, dtype=float, ndmin=1)
            if point.ndim != 1 or not np.all(np.isfinite(point)):
                raise ModelDomainError("deterministic point must be a finite vector")
            point.setflags(write=False)
            object.__setattr__(self, 'point', point)

    @property
    def is_deterministic(self) -> bool:
        return self.mode == PredictorMode.DETERMINISTIC

    @property
    def dim(self) -> int:
        return int(self.point.size) if self.is_deterministic else self.law.dim

    def output_law(self, history=None) -> Optional[NoiseModel]:
        """q_hat at the current step; ``None`` for a point-mass predictor."""
        return None if self.is_deterministic else self.law

    def predict_noise(self, rng: np.random.Generator, history=None) -> np.ndarray:
        """Draw w_hat_k (or return the fixed point)."""
        if self.is_deterministic:
            return self.point.copy()
        return self.law.sample(rng)


# --- Construction ---

def optimal_predictor(system: SystemModel) -> PredictorSpec:
    """Complete observation and w_hat_k drawn i.i.d. from the true noise law."""
    return PredictorSpec(ObservationModel.identity(), law=system.noise, name="optimal")


def mismatched_gaussian_predictor(system: SystemModel, tau: float, eta: float) -> PredictorSpec:
    """Believed noise law N(mu + tau * 1, Sigma + eta * I).

    Raises
    ------
    ModelDomainError
        If the system noise is not gaussian or Sigma + eta * I is not
        positive definite.
    """
    noise = system.noise
    if not isinstance(noise, GaussianNoise):
        raise ModelDomainError(f"mismatch predictor needs gaussian system noise, got {noise.kind}")
    if not eta >= -1.0:
        raise ModelDomainError(f"eta must be >= -1, got {eta}")
    d = noise.dim
    law = GaussianNoise(noise.mean + float(tau) * np.ones(d), noise.covariance + float(eta) * np.eye(d))
    return PredictorSpec(ObservationModel.identity(), law=law, name=f"mismatch({float(tau)!r}, {float(eta)!r})")


def deterministic_predictor(system: SystemModel, point: Sequence[float]) -> PredictorSpec:
    """Always predicts w_hat_k = point."""
    point = np.array(point, dtype=float, ndmin=1)
    if point.shape != (system.dim,):
        raise ContractViolationError(f"point has shape {point.shape}, system dimension is {system.dim}")
    return PredictorSpec(
        ObservationModel.identity(),
        mode=PredictorMode.DETERMINISTIC,
        point=point,
        name="deterministic",
    )


def mean_predictor(system: SystemModel) -> PredictorSpec:
    """Deterministic predictor at the noise mean."""
    spec = deterministic_predictor(system, system.noise.mean)
    return PredictorSpec(spec.observation, mode=spec.mode, point=spec.point, name="mean")


# --- Operations ---

def predicted_state(
    system: SystemModel,
    pred: PredictorSpec,
    state: np.ndarray,
    input_: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """x_hat_{k+1} = f(x_k, u_k) + w_hat_k."""
    return system.step_map(np.asarray(state, dtype=float), input_) + pred.predict_noise(rng)


def step_score(
    pred: PredictorSpec,
    realized_noise,
    eps: float,
    budget: int = DEFAULT_MC_BUDGET,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """P(||w_hat_k - w_k||_inf <= eps) with w_k fixed, and its standard error."""
    w = np.atleast_1d(np.asarray(realized_noise, dtype=float))
    if not eps > 0:
        raise ContractViolationError(f"eps must be positive, got {eps}")
    if w.shape != (pred.dim,):
        raise ContractViolationError(f"realized noise has shape {w.shape}, predictor dimension is {pred.dim}")
    if pred.is_deterministic:
        return (1.0 if float(np.max(np.abs(pred.point - w))) <= eps else 0.0), 0.0
    return pred.output_law().box_probability(w, eps, budget=budget, rng=rng)
