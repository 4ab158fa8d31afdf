"""Prediction-performance metrics.

Per-step scores are log box masses of the predictor's output law around the
realized noise. Everything else (trajectory rates, the expected rate and its
CI, the eps-accurate probability, running-rate curves) is built from those
scores. The discrete side covers the partition-based evaluation, the
type-based per-trajectory identity and the concentration bound.

Architecture: Pure NumPy/SciPy. No I/O.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_ENTROPY_SAMPLES, DEFAULT_MC_BUDGET, DEFAULT_WORKERS
from core.errors import ContractViolationError
from core.noise_models import max_box_probability
from core.partition import (
    DiscreteDist,
    GridPartition,
    discretize,
    empirical_type,
    kl_divergence,
    shannon_entropy,
)
from core.predictors import PredictorSpec, step_score
from core.sds_sim import SystemModel, Trajectory, seeded_trajectory
from core.seeding import STEP_SCORE, child_rng
from core.statistics import compute_mean_ci, log_mean_exp, running_mean
from logger import logger


@dataclass
class MetricsReport:
    """Outcome of an expected-rate experiment."""
    eps: float
    K: int
    n_traj: int
    per_trajectory_rates: np.ndarray
    mean_rate: float
    ci_halfwidth: float
    exponent_approx: float
    discrete_rate: Optional[float] = None
    epsilon_accurate_prob: Optional[Tuple[float, float]] = None
    n_degenerate: int = 0
    diagnostics: List[str] = field(default_factory=list)
    running_rates: Optional[np.ndarray] = None
    predictor_name: str = ""

    @property
    def degenerate(self) -> bool:
        """True when at least one trajectory scored a zero step."""
        return self.n_degenerate > 0

    def summary(self) -> Dict[str, object]:
        estimate, bound = self.epsilon_accurate_prob or (float('nan'), float('nan'))
        return {
            'predictor': self.predictor_name,
            'eps': self.eps,
            'K': self.K,
            'n_traj': self.n_traj,
            'mean_rate': self.mean_rate,
            'ci': self.ci_halfwidth,
            'exponent_approx': self.exponent_approx,
            'discrete_rate': float('nan') if self.discrete_rate is None else self.discrete_rate,
            'eps_accurate_prob': estimate,
            'gamma_bound': bound,
            'n_degenerate': self.n_degenerate,
        }


@dataclass(frozen=True)
class AccuracyEstimate:
    """eps-accurate probability at one horizon, with log-domain companions."""
    K: int
    estimate: float
    log_estimate: float
    gamma: float
    gamma_bound: float
    log_gamma_bound: float


@dataclass(frozen=True)
class LowerBoundCheck:
    """Discrete rate on an eps-grid against the Monte-Carlo expected rate."""
    discrete_rate: float
    mean_rate: float
    ci_halfwidth: float

    @property
    def margin(self) -> float:
        return self.mean_rate + self.ci_halfwidth - self.discrete_rate

    @property
    def holds(self) -> bool:
        return self.margin >= 0.0


# --- Per-trajectory scores ---

def step_log_scores(
    system: SystemModel,
    predictor: PredictorSpec,
    trajectory: Trajectory,
    eps: float,
    budget: int = DEFAULT_MC_BUDGET,
) -> np.ndarray:
    """ln step_score for k = 0..K-1; -inf marks a zero score.

    Monte-Carlo scores draw from the stream (trajectory seed, step k).
    """
    if trajectory.dim != system.dim or trajectory.noises.shape != (trajectory.K, system.dim):
        raise ContractViolationError("trajectory does not match the system dimension")
    law = predictor.output_law()
    needs_stream = law is not None and not law.exact_box_probability
    scores = np.empty(trajectory.K)
    for k in range(trajectory.K):
        rng = child_rng(trajectory.seed, STEP_SCORE, k) if needs_stream else None
        scores[k], _ = step_score(predictor, trajectory.noises[k], eps, budget=budget, rng=rng)
    with np.errstate(divide='ignore'):
        return np.log(scores)


def trajectory_rate(
    system: SystemModel,
    predictor: PredictorSpec,
    trajectory: Trajectory,
    eps: float,
    budget: int = DEFAULT_MC_BUDGET,
) -> float:
    """(1/K) sum_k ln step_score(w_k); -inf if any step scores zero."""
    return float(np.mean(step_log_scores(system, predictor, trajectory, eps, budget)))


def running_rate(
    system: SystemModel,
    predictor: PredictorSpec,
    trajectory: Trajectory,
    eps: float,
    budget: int = DEFAULT_MC_BUDGET,
) -> np.ndarray:
    """Running mean of the step log scores; entry k - 1 is the rate after k steps."""
    return running_mean(step_log_scores(system, predictor, trajectory, eps, budget))


def _trajectory_log_scores(
    index: int,
    system: SystemModel,
    predictor: PredictorSpec,
    eps: float,
    K: int,
    seed: int,
    budget: int,
) -> np.ndarray:
    trajectory = seeded_trajectory(system, K, seed, index)
    return step_log_scores(system, predictor, trajectory, eps, budget)


def collect_log_scores(
    system: SystemModel,
    predictor: PredictorSpec,
    eps: float,
    K: int,
    n_traj: int,
    seed: int,
    budget: int = DEFAULT_MC_BUDGET,
    workers: int = DEFAULT_WORKERS,
) -> np.ndarray:
    """(n_traj, K) step log scores; row i depends only on (seed, i)."""
    if K < 1 or n_traj < 1:
        raise ContractViolationError(f"K and n_traj must be >= 1, got K={K}, n_traj={n_traj}")
    if not eps > 0:
        raise ContractViolationError(f"eps must be positive, got {eps}")
    job = partial(
        _trajectory_log_scores,
        system=system, predictor=predictor, eps=eps, K=K, seed=seed, budget=budget,
    )
    if workers <= 1 or n_traj == 1:
        rows = [job(i) for i in range(n_traj)]
    else:
        logger.debug(f"Scoring {n_traj} trajectories on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            chunk = max(1, n_traj // (4 * workers))
            rows = list(executor.map(job, range(n_traj), chunksize=chunk))
    return np.vstack(rows)


# --- Expected performance ---

def expected_rate(
    system: SystemModel,
    predictor: PredictorSpec,
    eps: float,
    K: int,
    n_traj: int,
    seed: int,
    budget: int = DEFAULT_MC_BUDGET,
    workers: int = DEFAULT_WORKERS,
    keep_running: bool = False,
    partition: Optional[GridPartition] = None,
) -> MetricsReport:
    """Monte-Carlo mean of trajectory_rate over ``n_traj`` seeded trajectories.

    Parameters
    ----------
    keep_running : bool
        Attach the (n_traj, K) running-rate curves to the report.
    partition : GridPartition, optional
        When given, also evaluate the discrete rate on it.

    Trajectories with a zero step score are counted in ``n_degenerate``;
    the mean is then reported as -inf with an infinite CI half-width.
    """
    logger.info(f"Evaluating '{predictor.name}' on {n_traj} trajectories, K={K}, eps={eps}")
    scores = collect_log_scores(system, predictor, eps, K, n_traj, seed, budget, workers)
    rates = scores.mean(axis=1)
    finite = np.isfinite(rates)
    n_degenerate = int(np.count_nonzero(~finite))
    diagnostics = []
    if n_degenerate:
        mean, ci = float('-inf'), float('inf')
        message = f"{n_degenerate} of {n_traj} trajectories have a zero-probability step; rate is -inf"
        diagnostics.append(message)
        logger.warning(message)
    else:
        mean, ci = compute_mean_ci(rates)

    gamma, _, _ = max_box_probability(system.noise, eps, budget=budget, seed=seed)
    with np.errstate(divide='ignore'):
        log_estimate = log_mean_exp(K * rates)
        gamma_bound = float(np.exp(K * np.log(gamma)))

    report = MetricsReport(
        eps=eps,
        K=K,
        n_traj=n_traj,
        per_trajectory_rates=rates,
        mean_rate=mean,
        ci_halfwidth=ci,
        exponent_approx=exponent_approx(system, eps),
        epsilon_accurate_prob=(float(np.exp(log_estimate)), gamma_bound),
        n_degenerate=n_degenerate,
        diagnostics=diagnostics,
        predictor_name=predictor.name,
    )
    if keep_running:
        report.running_rates = np.vstack([running_mean(row) for row in scores])
    if partition is not None:
        report.discrete_rate = discrete_rate_for(system, predictor, partition, K, seed=seed)
    return report


def exponent_approx(system: SystemModel, eps: float) -> float:
    """d ln(2 eps) - H_d(q), the small-eps approximation of the exponent."""
    if not eps > 0:
        raise ContractViolationError(f"eps must be positive, got {eps}")
    return float(system.dim * np.log(2.0 * eps) - system.noise.differential_entropy())


# --- Discrete evaluation ---

def discrete_rate(q_disc: DiscreteDist, qhat_sequence: Sequence[DiscreteDist]) -> float:
    """-H_s(q) - (1/K) sum_k KL(q || qhat_k); -inf when some KL is infinite."""
    if len(qhat_sequence) == 0:
        raise ContractViolationError("discrete rate needs at least one predictor law")
    divergences = np.array([kl_divergence(q_disc, qhat) for qhat in qhat_sequence])
    if not np.all(np.isfinite(divergences)):
        logger.warning(
            f"{np.count_nonzero(~np.isfinite(divergences))} predictor laws miss cells charged by the noise; "
            f"discrete rate is -inf"
        )
        return float('-inf')
    return float(-shannon_entropy(q_disc) - divergences.mean())


def discretize_law(law, partition: GridPartition, seed: int) -> DiscreteDist:
    """Analytic discretization for product-form laws, Monte Carlo otherwise."""
    method = "analytic" if law.is_product_form else "monte_carlo"
    return discretize(law, partition, method=method, n=DEFAULT_ENTROPY_SAMPLES, seed=seed)


def discrete_rate_for(
    system: SystemModel,
    predictor: PredictorSpec,
    partition: GridPartition,
    K: int,
    seed: int = 0,
) -> float:
    """Discrete rate of ``predictor`` with its per-step laws discretized on ``partition``."""
    q_disc = discretize_law(system.noise, partition, seed)
    if predictor.is_deterministic:
        weights = np.zeros(partition.n_cells)
        weights[partition.label(predictor.point)] = 1.0
        qhat = DiscreteDist(partition, weights)
    elif predictor.output_law() is system.noise:
        qhat = q_disc
    else:
        qhat = discretize_law(predictor.output_law(), partition, seed)
    return discrete_rate(q_disc, [qhat] * K)


def discrete_log_score(noises: np.ndarray, partition: GridPartition, q_disc: DiscreteDist) -> float:
    """(1/K) sum_k ln q(label(w_k)), the direct per-step summation."""
    labels = partition.labels(np.asarray(noises, dtype=float))
    with np.errstate(divide='ignore'):
        return float(np.mean(np.log(q_disc.weights[labels])))


def type_rate(
    noises: np.ndarray,
    partition: GridPartition,
    q_disc: DiscreteDist,
    reference: Optional[DiscreteDist] = None,
) -> float:
    """-H_s(type) - KL(type || r) with r = ``reference`` or ``q_disc``.

    With r = q_disc this is the optimal predictor's discrete per-trajectory
    log-probability, written through the empirical type of the noises.
    """
    if not q_disc.partition.same_as(partition):
        raise ContractViolationError("q_disc is defined on a different partition")
    law = q_disc if reference is None else reference
    observed = empirical_type(partition, noises)
    divergence = kl_divergence(observed, law)
    if not np.isfinite(divergence):
        logger.warning("A noise landed in a zero-mass cell; type rate is -inf")
        return float('-inf')
    return float(-shannon_entropy(observed) - divergence)


def hoeffding_constant(q_disc: DiscreteDist) -> float:
    """L = max over positive-mass cells of -ln q_i / q_i."""
    positive = q_disc.weights[q_disc.weights > 0]
    return float(np.max(-np.log(positive) / positive))


def hoeffding_bound(q_disc: DiscreteDist, K: int, t: float) -> float:
    """min(1, 2 exp(-2 K t^2 / L^2)) bound on P(|type_rate + H_s(q)| >= t)."""
    if not t > 0:
        raise ContractViolationError(f"t must be positive, got {t}")
    if K < 1:
        raise ContractViolationError(f"K must be >= 1, got {K}")
    L = hoeffding_constant(q_disc)
    if L == 0.0:
        logger.warning("Discrete law is a point mass; Hoeffding constant is 0 and the bound is 0")
        return 0.0
    return float(min(1.0, 2.0 * np.exp(-2.0 * K * t * t / (L * L))))


def deviation_frequency(
    system: SystemModel,
    partition: GridPartition,
    K: int,
    n_traj: int,
    seed: int,
    ts: Sequence[float],
) -> List[Tuple[float, float, float]]:
    """Empirical P(|type_rate + H_s(q)| >= t) next to its Hoeffding bound.

    Returns ``(t, frequency, bound)`` rows.
    """
    q_disc = discretize_law(system.noise, partition, seed)
    entropy = shannon_entropy(q_disc)
    deviations = np.empty(n_traj)
    for i in range(n_traj):
        trajectory = seeded_trajectory(system, K, seed, i)
        deviations[i] = abs(type_rate(trajectory.noises, partition, q_disc) + entropy)
    rows = []
    for t in ts:
        frequency = float(np.mean(deviations >= t))
        rows.append((float(t), frequency, hoeffding_bound(q_disc, K, t)))
    return rows


# --- eps-accurate probability ---

def _accuracy_estimate(log_scores: np.ndarray, K: int, gamma: float) -> AccuracyEstimate:
    with np.errstate(divide='ignore'):
        log_estimate = log_mean_exp(log_scores[:, :K].sum(axis=1))
        log_gamma_bound = float(K * np.log(gamma))
    return AccuracyEstimate(
        K=K,
        estimate=float(np.exp(log_estimate)),
        log_estimate=log_estimate,
        gamma=gamma,
        gamma_bound=float(np.exp(log_gamma_bound)),
        log_gamma_bound=log_gamma_bound,
    )


def epsilon_accurate_probability(
    system: SystemModel,
    predictor: PredictorSpec,
    eps: float,
    K: int,
    n_traj: int,
    seed: int,
    budget: int = DEFAULT_MC_BUDGET,
    workers: int = DEFAULT_WORKERS,
) -> AccuracyEstimate:
    """Mean over trajectories of the product of step scores, and gamma^K."""
    return epsilon_accurate_ladder(system, predictor, eps, [K], n_traj, seed, budget, workers)[0]


def epsilon_accurate_ladder(
    system: SystemModel,
    predictor: PredictorSpec,
    eps: float,
    horizons: Sequence[int],
    n_traj: int,
    seed: int,
    budget: int = DEFAULT_MC_BUDGET,
    workers: int = DEFAULT_WORKERS,
) -> List[AccuracyEstimate]:
    """eps-accurate probability at several horizons on prefixes of the same trajectories."""
    horizons = [int(k) for k in horizons]
    if not horizons or min(horizons) < 1:
        raise ContractViolationError("horizons must be a non-empty list of positive integers")
    scores = collect_log_scores(system, predictor, eps, max(horizons), n_traj, seed, budget, workers)
    gamma, _, _ = max_box_probability(system.noise, eps, budget=budget, seed=seed)
    return [_accuracy_estimate(scores, K, gamma) for K in horizons]


# --- Bound checks ---

def lower_bound_check(
    system: SystemModel,
    predictor: PredictorSpec,
    eps: float,
    K: int,
    n_traj: int,
    seed: int,
    budget: int = DEFAULT_MC_BUDGET,
    workers: int = DEFAULT_WORKERS,
) -> LowerBoundCheck:
    """Compare the discrete rate on an eps-width grid with the expected rate."""
    partition = GridPartition.around(system.noise, eps)
    report = expected_rate(system, predictor, eps, K, n_traj, seed, budget, workers, partition=partition)
    return LowerBoundCheck(report.discrete_rate, report.mean_rate, report.ci_halfwidth)
