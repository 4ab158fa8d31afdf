"""Stochastic dynamical systems x_{k+1} = f(x_k, u_k) + w_k and their observations.

Trajectories record both the states and the realized noises, so the
per-step prediction error can be scored against the noise that actually
drove the system.

Architecture: Pure NumPy. No I/O.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from config import DEFAULT_RANDOM_SPECTRAL_RADIUS, DIVERGENCE_THRESHOLD
from core.errors import ContractViolationError, ModelDomainError, SimulationDivergedError
from core.noise_models import GaussianNoise, NoiseModel
from core.seeding import INITIAL_STATE, PROCESS_NOISE, SYSTEM, child_rng, trajectory_seed
from logger import logger


class ObservationKind(Enum):
    """Supported observation maps y_k = g(x_k, u_k) + v_k."""
    IDENTITY = "identity"
    ADDITIVE_GAUSSIAN = "additive_gaussian"


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """Identity observation or the state plus independent gaussian noise."""
    kind: ObservationKind = ObservationKind.IDENTITY
    noise_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == ObservationKind.ADDITIVE_GAUSSIAN:
            if self.noise_cov is None:
                raise ModelDomainError("additive_gaussian observation needs a noise covariance")
            cov = np.array(self.noise_cov, dtype=float, ndmin=2)
            noise = GaussianNoise(np.zeros(cov.shape[0]), cov)
            object.__setattr__(self, 'noise_cov', noise.cov)
            object.__setattr__(self, '_noise', noise)
        else:
            object.__setattr__(self, '_noise', None)

    @classmethod
    def identity(cls) -> "ObservationModel":
        return cls(ObservationKind.IDENTITY)

    @classmethod
    def additive_gaussian(cls, noise_cov) -> "ObservationModel":
        return cls(ObservationKind.ADDITIVE_GAUSSIAN, noise_cov)

    @property
    def is_complete(self) -> bool:
        """True for y_k = x_k, the only case covered by the optimality results."""
        return self.kind == ObservationKind.IDENTITY

    def observe(self, state: np.ndarray, input_: Optional[np.ndarray], stream: np.random.Generator) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        if self._noise is None:
            return state.copy()
        if state.shape != (self._noise.dim,):
            raise ContractViolationError(
                f"state has shape {state.shape}, observation noise has dimension {self._noise.dim}"
            )
        return state + self._noise.sample(stream)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Dynamics f, input policy and noise law; together they define the SDS.

    Either ``F`` (linear case f(x, u) = F x + B u) or a callable ``dynamics``
    must be given. Custom dynamics have to be picklable module-level
    functions to be evaluated with more than one worker.
    """
    noise: NoiseModel
    F: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    dynamics: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    input_policy: Optional[Callable[[int], np.ndarray]] = None
    input_dim: int = 0

    def __post_init__(self):
        d = self.noise.dim
        if (self.F is None) == (self.dynamics is None):
            raise ModelDomainError("exactly one of F (linear case) or dynamics must be given")
        if self.F is not None:
            F = np.array(self.F, dtype=float, ndmin=2)
            if F.shape != (d, d):
                raise ContractViolationError(f"F must be {d}x{d}, got {F.shape}")
            F.setflags(write=False)
            object.__setattr__(self, 'F', F)
        if self.B is not None:
            B = np.array(self.B, dtype=float, ndmin=2)
            if B.shape[0] != d:
                raise ContractViolationError(f"B must have {d} rows, got {B.shape}")
            B.setflags(write=False)
            object.__setattr__(self, 'B', B)
            object.__setattr__(self, 'input_dim', int(B.shape[1]))

    # --- Construction ---

    @classmethod
    def linear(cls, F, noise: NoiseModel, B=None, input_policy=None) -> "SystemModel":
        return cls(noise=noise, F=F, B=B, input_policy=input_policy)

    @classmethod
    def random_linear(
        cls,
        noise: NoiseModel,
        seed: int,
        spectral_radius: float = DEFAULT_RANDOM_SPECTRAL_RADIUS,
    ) -> "SystemModel":
        return cls(noise=noise, F=random_matrix(noise.dim, seed, spectral_radius))

    # --- Evaluation ---

    @property
    def dim(self) -> int:
        return self.noise.dim

    @property
    def is_linear(self) -> bool:
        return self.F is not None

    def input_at(self, k: int) -> np.ndarray:
        """u_k; zero input unless a policy is set."""
        if self.input_policy is None:
            return np.zeros(self.input_dim)
        return np.atleast_1d(np.asarray(self.input_policy(k), dtype=float))

    def step_map(self, state: np.ndarray, input_: np.ndarray) -> np.ndarray:
        """f(x_k, u_k)."""
        if self.F is not None:
            out = self.F @ state
            if self.B is not None:
                out = out + self.B @ input_
            return out
        out = np.atleast_1d(np.asarray(self.dynamics(state, input_), dtype=float))
        if out.shape != (self.dim,):
            raise ContractViolationError(f"dynamics returned shape {out.shape}, expected ({self.dim},)")
        return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """x_0, the states x_1..x_K, the noises w_0..w_{K-1} and inputs u_0..u_{K-1}."""
    initial_state: np.ndarray
    states: np.ndarray
    noises: np.ndarray
    inputs: np.ndarray
    seed: int

    def __post_init__(self):
        if not (len(self.states) == len(self.noises) == len(self.inputs)):
            raise ContractViolationError("states, noises and inputs must have the same length")

    @property
    def K(self) -> int:
        return int(len(self.states))

    @property
    def dim(self) -> int:
        return int(self.initial_state.size)

    @property
    def all_states(self) -> np.ndarray:
        """(K + 1, d) array x_0..x_K."""
        return np.vstack([self.initial_state, self.states])

    def prefix(self, K: int) -> "Trajectory":
        """The first ``K`` steps of this trajectory."""
        if not 1 <= K <= self.K:
            raise ContractViolationError(f"prefix length must be in [1, {self.K}], got {K}")
        return Trajectory(self.initial_state, self.states[:K], self.noises[:K], self.inputs[:K], self.seed)


# --- Random system parts ---

def random_matrix(dim: int, seed: int, spectral_radius: float = DEFAULT_RANDOM_SPECTRAL_RADIUS) -> np.ndarray:
    """i.i.d. standard normal matrix rescaled to the given spectral radius."""
    A = child_rng(seed, SYSTEM, 0).standard_normal((dim, dim))
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho == 0.0:
        return A
    return A * (spectral_radius / rho)


def random_covariance(dim: int, seed: int) -> np.ndarray:
    """A A^T from an i.i.d. standard normal A, normalized to spectral radius 1."""
    A = child_rng(seed, SYSTEM, 1).standard_normal((dim, dim))
    S = A @ A.T
    S = 0.5 * (S + S.T)
    return S / float(np.max(np.linalg.eigvalsh(S)))


def random_mean(dim: int, seed: int) -> np.ndarray:
    return child_rng(seed, SYSTEM, 2).standard_normal(dim)


def initial_state(dim: int, seed: int) -> np.ndarray:
    """Standard gaussian initial state drawn from its own stream."""
    return child_rng(seed, INITIAL_STATE).standard_normal(dim)


# --- Operations ---

def simulate(system: SystemModel, x0, K: int, seed: int) -> Trajectory:
    """Run the recursion for ``K`` steps, recording states and noises.

    Raises
    ------
    SimulationDivergedError
        When a state turns non-finite or its infinity norm exceeds the
        divergence threshold.
    """
    if K < 1:
        raise ContractViolationError(f"K must be >= 1, got {K}")
    x = np.array(x0, dtype=float, ndmin=1)
    if x.shape != (system.dim,):
        raise ContractViolationError(f"x0 has shape {x.shape}, system dimension is {system.dim}")

    noises = system.noise.sample(child_rng(seed, PROCESS_NOISE), size=K)
    inputs = np.array([system.input_at(k) for k in range(K)], dtype=float)
    states = np.empty((K, system.dim))
    initial = x.copy()
    for k in range(K):
        x = system.step_map(x, inputs[k]) + noises[k]
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_THRESHOLD:
            logger.warning(f"Trajectory with seed {seed} diverged at step {k + 1}")
            raise SimulationDivergedError(k + 1)
        states[k] = x
    for array in (initial, states, noises, inputs):
        array.setflags(write=False)
    return Trajectory(initial, states, noises, inputs, int(seed))


def replay(system: SystemModel, trajectory: Trajectory) -> np.ndarray:
    """Recompute the states from x_0, the recorded inputs and noises."""
    x = trajectory.initial_state.copy()
    states = np.empty_like(trajectory.states)
    for k in range(trajectory.K):
        x = system.step_map(x, trajectory.inputs[k]) + trajectory.noises[k]
        states[k] = x
    return states


def observe(model: ObservationModel, state, input_, stream: np.random.Generator) -> np.ndarray:
    """y_k for the given observation model."""
    return model.observe(state, input_, stream)


def check_support_diameter(noise: NoiseModel, eps: float) -> bool:
    """diam(supp) > 2 eps, the regime where the eps-accurate probability decays."""
    return noise.support_diameter() > 2.0 * eps


def seeded_trajectory(system: SystemModel, K: int, seed: int, index: int) -> Trajectory:
    """Trajectory ``index`` of an experiment seeded with ``seed``."""
    traj_seed = trajectory_seed(seed, index)
    return simulate(system, initial_state(system.dim, traj_seed), K, traj_seed)
