"""Unpredictable-noise design under zero-mean and variance constraints.

``numeric_design`` maximizes grid entropy on [-N, N] subject to
sum w = 1, sum x w = 0 and sum x^2 w = sigma^2. The optimum is the
exponential family w_i proportional to exp(l1 x_i + l2 x_i^2), so the
problem reduces to the two-parameter convex dual

    min_l  log sum_i exp(l1 x_i + l2 x_i^2) - l2 sigma^2

solved with BFGS (analytic gradient) and polished with Newton steps on
the 2x2 moment covariance.

With the cap at N = sqrt(3) sigma the solution is the uniform law
(l2 = 0). A wider cap admits equal-variance laws with higher entropy and
the optimum becomes a truncated gaussian shape (l2 < 0). The uniform law
stays the minimizer of the one-step min-max interval mass.

Architecture: Pure NumPy/SciPy. No I/O.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.optimize import minimize, minimize_scalar
from scipy.special import logsumexp, softmax

from config import (
    CANDIDATE_GRID,
    DEFAULT_CAP_SIGMAS,
    DEFAULT_DESIGN_GRID,
    DEFAULT_DESIGN_MAX_ITER,
    DEFAULT_DESIGN_TOL,
    GAUSSIAN_BOUNDS_SIGMAS,
    MIN_DESIGN_GRID,
    ONE_STEP_RESOLUTION_DIVISOR,
)
from core.errors import (
    ConfigurationError,
    ContractViolationError,
    DesignConvergenceError,
    DesignInfeasibleError,
    ModelDomainError,
    UnsupportedMethodError,
)
from core.noise_models import GridDensityNoise, NoiseModel, UniformBoxNoise
from core.partition import DiscreteDist, GridPartition
from logger import logger

# Relative slack on N >= sqrt(3) sigma
_CAP_SLACK = 1e-12
# Relative tolerance on candidate moments
_CANDIDATE_MOMENT_TOL = 1e-3
# Values closer than this are reported as ties
_TIE_TOL = 1e-9
_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class DesignProblem:
    """1-D design: standard deviation ``sigma`` under a support cap [-cap, cap]."""
    sigma: float
    cap: Optional[float] = None
    grid_resolution: int = DEFAULT_DESIGN_GRID
    tolerance: float = DEFAULT_DESIGN_TOL
    max_iter: int = DEFAULT_DESIGN_MAX_ITER

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if self.cap is None:
            object.__setattr__(self, 'cap', DEFAULT_CAP_SIGMAS * float(self.sigma))
        if self.grid_resolution < MIN_DESIGN_GRID:
            raise ConfigurationError(f"grid_resolution must be >= {MIN_DESIGN_GRID}, got {self.grid_resolution}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.cap < _SQRT3 * self.sigma * (1.0 - _CAP_SLACK):
            raise DesignInfeasibleError(
                f"support cap {self.cap!r} is below sqrt(3) * sigma = {_SQRT3 * self.sigma!r}"
            )

    def partition(self) -> GridPartition:
        width = 2.0 * self.cap / self.grid_resolution
        return GridPartition([-self.cap], [self.cap], [width])


@dataclass(frozen=True, eq=False)
class DesignResult:
    """Numeric design on the problem grid."""
    problem: DesignProblem
    dist: DiscreteDist
    entropy: float
    residuals: Tuple[float, float, float]
    lambdas: Tuple[float, float]
    converged: bool
    iterations: int

    @property
    def noise(self) -> GridDensityNoise:
        return GridDensityNoise.from_discrete(self.dist)

    @property
    def centers(self) -> np.ndarray:
        return self.dist.partition.axis_centers(0)

    @property
    def weights(self) -> np.ndarray:
        return self.dist.bounded_weights


@dataclass
class EquivalenceReport:
    """Candidates ranked by one-step value (ascending) and by entropy (descending)."""
    sigma: float
    r: float
    names: List[str]
    one_step_values: List[float]
    entropies: List[float]
    by_value: List[str] = field(default_factory=list)
    by_entropy: List[str] = field(default_factory=list)
    value_ties: List[Tuple[str, ...]] = field(default_factory=list)
    entropy_ties: List[Tuple[str, ...]] = field(default_factory=list)
    excluded: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def leader_by_value(self) -> Optional[str]:
        return self.by_value[0] if self.by_value else None

    @property
    def leader_by_entropy(self) -> Optional[str]:
        return self.by_entropy[0] if self.by_entropy else None

    @property
    def agree(self) -> bool:
        """Both rankings put the same candidate first."""
        return bool(self.by_value) and self.leader_by_value == self.leader_by_entropy

    def rows(self):
        """``(name, one_step_value, entropy, value_rank, entropy_rank)`` per candidate."""
        return [
            (name, value, entropy, self.by_value.index(name) + 1, self.by_entropy.index(name) + 1)
            for name, value, entropy in zip(self.names, self.one_step_values, self.entropies)
        ]


# --- Analytic design ---

def analytic_design(sigma: Union[float, Sequence[float]]) -> UniformBoxNoise:
    """Uniform law on [-sqrt(3) sigma, sqrt(3) sigma], axiswise for a vector of sigmas."""
    sigma = np.array(sigma, dtype=float, ndmin=1)
    if np.any(sigma <= 0):
        raise ConfigurationError("sigma must be positive")
    return UniformBoxNoise(np.zeros(sigma.size), _SQRT3 * sigma)


def problems_from_covariance(D, **kwargs) -> List[DesignProblem]:
    """One problem per axis of a diagonal covariance D."""
    D = np.array(D, dtype=float, ndmin=2)
    if D.shape[0] != D.shape[1]:
        raise ConfigurationError(f"covariance must be square, got {D.shape}")
    if np.count_nonzero(D - np.diag(np.diag(D))):
        raise UnsupportedMethodError("only diagonal covariances are designed (axiswise)")
    return [DesignProblem(float(np.sqrt(v)), **kwargs) for v in np.diag(D)]


# --- Numeric design ---

def _dual(theta: np.ndarray, z: np.ndarray, z2: np.ndarray) -> Tuple[float, np.ndarray]:
    logits = theta[0] * z + theta[1] * z2
    w = softmax(logits)
    value = float(logsumexp(logits) - theta[1])
    grad = np.array([w @ z, w @ z2 - 1.0])
    return value, grad


def numeric_design(problem: DesignProblem, strict: bool = False) -> DesignResult:
    """Maximum-entropy weights on the problem grid.

    Parameters
    ----------
    problem : DesignProblem
        Standard deviation, cap and grid.
    strict : bool
        Raise ``DesignConvergenceError`` instead of returning an unconverged
        result with a warning.
    """
    partition = problem.partition()
    x = partition.axis_centers(0)
    # Standardized coordinates keep the dual well scaled for any sigma
    z = x / problem.sigma
    z2 = z * z

    result = minimize(
        _dual, np.zeros(2), args=(z, z2), jac=True, method='BFGS',
        options={'gtol': 1e-10, 'maxiter': problem.max_iter},
    )
    theta = np.asarray(result.x, dtype=float)
    iterations = int(result.nit)

    target = problem.tolerance * 1e-3
    for _ in range(problem.max_iter):
        value, grad = _dual(theta, z, z2)
        if np.max(np.abs(grad)) <= target:
            break
        w = softmax(theta[0] * z + theta[1] * z2)
        features = np.vstack([z, z2])
        centered = features - (features @ w)[:, None]
        hessian = (centered * w) @ centered.T
        step = np.linalg.solve(hessian, -grad)
        scale = 1.0
        while scale > 1e-8 and _dual(theta + scale * step, z, z2)[0] > value:
            scale *= 0.5
        theta = theta + scale * step
        iterations += 1

    w = softmax(theta[0] * z + theta[1] * z2)
    w = w / w.sum()
    residuals = (
        float(w.sum() - 1.0),
        float(w @ x),
        float(w @ (x * x) - problem.sigma ** 2),
    )
    converged = max(abs(r) for r in residuals) <= problem.tolerance
    if not converged:
        message = f"design did not reach tolerance {problem.tolerance!r}; residuals {residuals}"
        if strict:
            raise DesignConvergenceError(residuals, message)
        logger.warning(message)

    dist = DiscreteDist(partition, np.append(w, 0.0))
    entropy = GridDensityNoise(partition, w).differential_entropy()
    lambdas = (float(theta[0] / problem.sigma), float(theta[1] / problem.sigma ** 2))
    logger.debug(f"Design sigma={problem.sigma!r}, cap={problem.cap!r}: entropy={entropy!r}, lambdas={lambdas}")
    return DesignResult(problem, dist, float(entropy), residuals, lambdas, converged, iterations)


def kkt_regression(result: DesignResult) -> Tuple[float, float, float]:
    """Least-squares fit of ln w_i against (1, x_i, x_i^2)."""
    w = result.weights
    x = result.centers
    positive = w > 0
    design = np.column_stack([np.ones(np.count_nonzero(positive)), x[positive], x[positive] ** 2])
    coef, *_ = np.linalg.lstsq(design, np.log(w[positive]), rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def density_sup_distance(design: GridDensityNoise, reference: NoiseModel) -> float:
    """Largest density gap over the design cell centres."""
    centers = design.partition.cell_centers()
    return float(np.max(np.abs(design.densities(centers) - reference.densities(centers))))


# --- One-step min-max ---

def _as_noise(q) -> Tuple[NoiseModel, float]:
    """Noise model plus the mass it carries; overflow mass of a DiscreteDist is dropped."""
    scale = 1.0
    if isinstance(q, DiscreteDist):
        bounded = q.bounded_weights
        if bounded.sum() <= 0.0:
            raise ModelDomainError("distribution has no mass on bounded cells")
        scale = float(bounded.sum())
        q = GridDensityNoise(q.partition, bounded / bounded.sum())
    if q.dim != 1:
        raise ContractViolationError(f"one-step value is defined for 1-D laws, got dimension {q.dim}")
    return q, scale


def _interval_masses(q: NoiseModel, centers: np.ndarray, r: float) -> np.ndarray:
    if isinstance(q, GridDensityNoise):
        return q.interval_masses(centers - r, centers + r)
    return np.array([q.box_probability([u], r)[0] for u in centers])


def one_step_value(q: Union[NoiseModel, DiscreteDist], r: float) -> Tuple[float, float]:
    """max_u P(u - r <= W <= u + r) and the maximizing centre.

    Grid search at step <= r / 50 over the support, then bounded scalar
    refinement around the best grid point. Ties go to the smallest |u|.
    A DiscreteDist is read as the piecewise-constant density of its bounded
    cells; its overflow mass has no location and never counts toward the value.
    """
    if not r > 0:
        raise ContractViolationError(f"r must be positive, got {r}")
    q, scale = _as_noise(q)
    lower, upper = q.support_bounds(GAUSSIAN_BOUNDS_SIGMAS)
    step = r / ONE_STEP_RESOLUTION_DIVISOR
    reach = max(abs(float(lower[0])), abs(float(upper[0]))) + r
    n = int(np.ceil(reach / step))
    grid = step * np.arange(-n, n + 1)
    masses = _interval_masses(q, grid, r)
    best = float(masses.max())
    near = np.flatnonzero(masses >= best - _TIE_TOL)
    index = near[np.argmin(np.abs(grid[near]))]
    u = float(grid[index])

    refined = minimize_scalar(
        lambda s: -float(_interval_masses(q, np.array([s]), r)[0]),
        bounds=(u - step, u + step),
        method='bounded',
        options={'xatol': step * 1e-3},
    )
    if -refined.fun > best + _TIE_TOL:
        best, u = float(-refined.fun), float(refined.x)
    return min(scale * best, 1.0), u


# --- Candidate family ---

def _grid_candidate(dist, half_width: float, resolution: int) -> GridDensityNoise:
    partition = GridPartition([-half_width], [half_width], [2.0 * half_width / resolution])
    masses = np.diff(dist.cdf(partition.axis_edges(0)))
    return GridDensityNoise(partition, masses / masses.sum())


def truncated_gaussian_candidate(
    sigma: float,
    cut: float = DEFAULT_CAP_SIGMAS,
    resolution: int = CANDIDATE_GRID,
) -> GridDensityNoise:
    """Gaussian truncated at +-cut scale units, rescaled to variance sigma^2."""
    base = stats.truncnorm(-cut, cut)
    scale = sigma / float(np.sqrt(base.var()))
    return _grid_candidate(stats.truncnorm(-cut, cut, scale=scale), cut * scale, resolution)


def triangular_candidate(sigma: float, resolution: int = CANDIDATE_GRID) -> GridDensityNoise:
    """Symmetric triangle on [-sqrt(6) sigma, sqrt(6) sigma]."""
    a = float(np.sqrt(6.0)) * sigma
    return _grid_candidate(stats.triang(0.5, loc=-a, scale=2.0 * a), a, resolution)


def default_candidates(sigma: float) -> List[Tuple[str, NoiseModel]]:
    return [
        ("uniform", analytic_design(sigma)),
        ("truncated_gaussian", truncated_gaussian_candidate(sigma)),
        ("triangular", triangular_candidate(sigma)),
    ]


def _moment_problem(q: NoiseModel, sigma: float) -> Optional[str]:
    if q.dim != 1:
        return f"dimension {q.dim}"
    if not np.isfinite(q.support_diameter()):
        return "unbounded support"
    mean = float(q.mean[0])
    var = float(q.covariance[0, 0])
    if abs(mean) > _CANDIDATE_MOMENT_TOL * sigma:
        return f"mean {mean!r}"
    if abs(var - sigma ** 2) > _CANDIDATE_MOMENT_TOL * sigma ** 2:
        return f"variance {var!r}"
    return None


def _ranking(names: List[str], values: List[float], descending: bool):
    order = sorted(range(len(names)), key=lambda i: -values[i] if descending else values[i])
    ranked = [names[i] for i in order]
    ties = []
    group = [order[0]] if order else []
    for i in order[1:]:
        if abs(values[i] - values[group[0]]) <= _TIE_TOL * max(1.0, abs(values[group[0]])):
            group.append(i)
        else:
            if len(group) > 1:
                ties.append(tuple(names[j] for j in group))
            group = [i]
    if len(group) > 1:
        ties.append(tuple(names[j] for j in group))
    return ranked, ties


def equivalence_check(
    sigma: float,
    r: float,
    candidates: Optional[Sequence[Tuple[str, NoiseModel]]] = None,
) -> EquivalenceReport:
    """Rank candidates by one-step value and by entropy.

    Candidates violating the zero-mean, variance or bounded-support
    constraints are excluded and listed in the report.
    """
    if candidates is None:
        candidates = default_candidates(sigma)
    report = EquivalenceReport(sigma=sigma, r=r, names=[], one_step_values=[], entropies=[])
    for name, q in candidates:
        reason = _moment_problem(q, sigma)
        if reason is not None:
            logger.warning(f"Excluding candidate '{name}': {reason}")
            report.excluded.append((name, reason))
            continue
        report.names.append(name)
        report.one_step_values.append(one_step_value(q, r)[0])
        report.entropies.append(q.differential_entropy())
    if report.names:
        report.by_value, report.value_ties = _ranking(report.names, report.one_step_values, descending=False)
        report.by_entropy, report.entropy_ties = _ranking(report.names, report.entropies, descending=True)
    if report.names and not report.agree:
        logger.info(
            f"Rankings disagree: '{report.leader_by_value}' minimizes the one-step value, "
            f"'{report.leader_by_entropy}' maximizes entropy"
        )
    return report
