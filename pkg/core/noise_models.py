"""Process-noise laws: sampling, density, box probabilities and entropy.

Three kinds are supported, all immutable once built:

* ``GaussianNoise(mean, cov)``
* ``UniformBoxNoise(center, half_widths)``
* ``GridDensityNoise(partition, weights)`` - piecewise-constant density over the
  bounded cells of a ``GridPartition``; the designer's numeric output.

Entropies are in nats. Random draws always come from a caller-supplied
``numpy.random.Generator``; models never own a stream.

Architecture: Pure NumPy/SciPy. No I/O.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Dict, Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

from config import (
    DEFAULT_ENTROPY_SAMPLES,
    DEFAULT_MC_BUDGET,
    GAUSSIAN_BOUNDS_SIGMAS,
    GRID_WEIGHT_SUM_TOL,
    MC_CHUNK_SIZE,
    MIN_ENTROPY_SAMPLES,
)
from core.errors import (
    ConfigurationError,
    ContractViolationError,
    ModelDomainError,
    SupportMismatchError,
    UnsupportedMethodError,
)
from core.partition import DiscreteDist, GridPartition
from core.seeding import child_rng, ESTIMATOR
from core.statistics import compute_standard_error

# Relative tolerance on cov - cov.T
_SYMMETRY_TOL = 1e-12
# Candidate centres kept for the multistart search of a multi-dimensional grid density
_GAMMA_CANDIDATES = 50
_GAMMA_REFINE = 5


def _format(values) -> str:
    return ", ".join(repr(float(v)) for v in np.ravel(values))


def _frozen_array(values, ndmin: int = 1) -> np.ndarray:
    array = np.array(values, dtype=float, ndmin=ndmin)
    array.setflags(write=False)
    return array


class NoiseModel(ABC):
    """A d-dimensional noise law W with density q."""
    kind: ClassVar[str] = ""

    # --- Shape & moments ---

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @property
    @abstractmethod
    def mean(self) -> np.ndarray:
        ...

    @property
    @abstractmethod
    def covariance(self) -> np.ndarray:
        ...

    @property
    def is_product_form(self) -> bool:
        """True when q factorizes over the coordinate axes."""
        return False

    @property
    def is_symmetric_unimodal(self) -> bool:
        """True when the box mass around a centre is maximal at the mean."""
        return False

    @property
    def exact_box_probability(self) -> bool:
        """False when ``box_probability`` is a Monte-Carlo estimate."""
        return True

    # --- Density ---

    @abstractmethod
    def log_densities(self, points: np.ndarray) -> np.ndarray:
        """ln q at every row of an (N, d) array, -inf outside the support."""

    def _as_points(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1) if self.dim == 1 else points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ContractViolationError(f"expected points of dimension {self.dim}, got shape {points.shape}")
        return points

    def densities(self, points: np.ndarray) -> np.ndarray:
        return np.exp(self.log_densities(points))

    def density(self, point) -> float:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            raise ContractViolationError(f"point has shape {point.shape}, model dimension is {self.dim}")
        return float(self.densities(point.reshape(1, -1))[0])

    # --- Sampling ---

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """One draw of shape (d,), or ``size`` draws of shape (size, d)."""

    # --- Probabilities ---

    def axis_interval_masses(self, axis: int, edges: np.ndarray) -> np.ndarray:
        """Marginal mass of consecutive intervals [edges[i], edges[i+1]) on one axis."""
        raise UnsupportedMethodError(f"{type(self).__name__} has no per-axis interval masses")

    @abstractmethod
    def box_probability(
        self,
        center: np.ndarray,
        eps: float,
        budget: int = DEFAULT_MC_BUDGET,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[float, float]:
        """P(||W - center||_inf <= eps) and its standard error."""

    def _check_box_args(self, center, eps) -> np.ndarray:
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.shape != (self.dim,):
            raise ContractViolationError(f"center has shape {center.shape}, model dimension is {self.dim}")
        if not eps > 0:
            raise ContractViolationError(f"eps must be positive, got {eps}")
        return center

    # --- Entropy & support ---

    @abstractmethod
    def differential_entropy(self) -> float:
        ...

    @abstractmethod
    def support_bounds(self, n_sigmas: float = GAUSSIAN_BOUNDS_SIGMAS) -> Tuple[np.ndarray, np.ndarray]:
        """Box holding the support (or its effective part for unbounded laws)."""

    @abstractmethod
    def support_diameter(self) -> float:
        """Infinity-norm diameter of supp(q); inf for unbounded laws."""

    @abstractmethod
    def to_block(self) -> Dict[str, str]:
        """Keys of the plain-text config block describing this model."""


@dataclass(frozen=True, eq=False)
class GaussianNoise(NoiseModel):
    """N(mean, cov) with symmetric positive definite covariance."""
    mean_vector: np.ndarray
    cov: np.ndarray
    kind: ClassVar[str] = "gaussian"

    def __post_init__(self):
        mean = _frozen_array(self.mean_vector)
        cov = np.array(self.cov, dtype=float, ndmin=2)
        d = mean.size
        if cov.shape != (d, d):
            raise ModelDomainError(f"covariance must be {d}x{d}, got {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > _SYMMETRY_TOL * scale:
            raise ModelDomainError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise ModelDomainError(f"covariance is not positive definite: {e}") from e
        cov.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, 'mean_vector', mean)
        object.__setattr__(self, 'cov', cov)
        object.__setattr__(self, '_chol', chol)
        object.__setattr__(self, '_log_det', float(2.0 * np.sum(np.log(np.diag(chol)))))
        object.__setattr__(self, '_diagonal', bool(np.count_nonzero(cov - np.diag(np.diag(cov))) == 0))

    @property
    def dim(self) -> int:
        return int(self.mean_vector.size)

    @property
    def mean(self) -> np.ndarray:
        return self.mean_vector

    @property
    def covariance(self) -> np.ndarray:
        return self.cov

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @property
    def is_product_form(self) -> bool:
        return self._diagonal

    @property
    def exact_box_probability(self) -> bool:
        return self._diagonal

    @property
    def is_symmetric_unimodal(self) -> bool:
        return True

    def log_densities(self, points: np.ndarray) -> np.ndarray:
        points = self._as_points(points)
        z = solve_triangular(self._chol, (points - self.mean_vector).T, lower=True)
        maha = np.sum(z * z, axis=0)
        return -0.5 * (self.dim * np.log(2.0 * np.pi) + self._log_det + maha)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        if size is None:
            return self.mean_vector + self._chol @ rng.standard_normal(self.dim)
        return self.mean_vector + rng.standard_normal((size, self.dim)) @ self._chol.T

    def axis_interval_masses(self, axis: int, edges: np.ndarray) -> np.ndarray:
        z = (np.asarray(edges, dtype=float) - self.mean_vector[axis]) / self.std[axis]
        lo, hi = z[:-1], z[1:]
        # upper tail through the survival function keeps precision far from the mean
        upper_tail = ndtr(-lo) - ndtr(-hi)
        lower_tail = ndtr(hi) - ndtr(lo)
        return np.where(lo > 0, upper_tail, lower_tail)

    def box_probability(self, center, eps, budget=DEFAULT_MC_BUDGET, rng=None):
        center = self._check_box_args(center, eps)
        if self._diagonal:
            mass = 1.0
            for j in range(self.dim):
                mass *= float(self.axis_interval_masses(j, [center[j] - eps, center[j] + eps])[0])
            return min(max(mass, 0.0), 1.0), 0.0
        if budget <= 0:
            raise ConfigurationError("a Monte-Carlo budget >= 1 is required for a general-covariance gaussian")
        if rng is None:
            rng = np.random.default_rng(0)
        # Density averaged over uniform draws in the box; positive wherever q is
        volume = (2.0 * eps) ** self.dim
        total = 0.0
        total_sq = 0.0
        remaining = int(budget)
        while remaining > 0:
            m = min(remaining, MC_CHUNK_SIZE)
            points = center + eps * rng.uniform(-1.0, 1.0, size=(m, self.dim))
            values = volume * self.densities(points)
            total += float(np.sum(values))
            total_sq += float(np.sum(values * values))
            remaining -= m
        p = total / budget
        var = max(total_sq / budget - p * p, 0.0)
        return min(p, 1.0), float(np.sqrt(var / budget))

    def differential_entropy(self) -> float:
        return float(0.5 * (self.dim * np.log(2.0 * np.pi * np.e) + self._log_det))

    def support_bounds(self, n_sigmas=GAUSSIAN_BOUNDS_SIGMAS):
        half = n_sigmas * self.std
        return self.mean_vector - half, self.mean_vector + half

    def support_diameter(self) -> float:
        return float('inf')

    def to_block(self) -> Dict[str, str]:
        return {'kind': self.kind, 'mean': _format(self.mean_vector), 'cov': _format(self.cov)}


@dataclass(frozen=True, eq=False)
class UniformBoxNoise(NoiseModel):
    """Uniform law on the box center +- half_widths."""
    center: np.ndarray
    half_widths: np.ndarray
    kind: ClassVar[str] = "uniform_box"

    def __post_init__(self):
        center = _frozen_array(self.center)
        half = _frozen_array(self.half_widths)
        if half.size == 1 and center.size > 1:
            half = _frozen_array(np.full(center.size, half[0]))
        if half.shape != center.shape:
            raise ModelDomainError(f"half_widths shape {half.shape} does not match center shape {center.shape}")
        if np.any(half <= 0) or not np.all(np.isfinite(half)):
            raise ModelDomainError("uniform_box half-widths must be strictly positive and finite")
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'half_widths', half)

    @property
    def dim(self) -> int:
        return int(self.center.size)

    @property
    def mean(self) -> np.ndarray:
        return self.center

    @property
    def covariance(self) -> np.ndarray:
        return np.diag(self.half_widths ** 2 / 3.0)

    @property
    def is_product_form(self) -> bool:
        return True

    @property
    def is_symmetric_unimodal(self) -> bool:
        return True

    def log_densities(self, points: np.ndarray) -> np.ndarray:
        points = self._as_points(points)
        inside = np.all(np.abs(points - self.center) <= self.half_widths, axis=1)
        log_q = -float(np.sum(np.log(2.0 * self.half_widths)))
        return np.where(inside, log_q, -np.inf)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        shape = self.dim if size is None else (size, self.dim)
        return self.center + self.half_widths * rng.uniform(-1.0, 1.0, size=shape)

    def axis_interval_masses(self, axis: int, edges: np.ndarray) -> np.ndarray:
        lo = self.center[axis] - self.half_widths[axis]
        hi = self.center[axis] + self.half_widths[axis]
        clipped = np.clip(np.asarray(edges, dtype=float), lo, hi)
        return np.diff(clipped) / (hi - lo)

    def box_probability(self, center, eps, budget=DEFAULT_MC_BUDGET, rng=None):
        center = self._check_box_args(center, eps)
        lo = np.maximum(center - eps, self.center - self.half_widths)
        hi = np.minimum(center + eps, self.center + self.half_widths)
        overlap = np.clip(hi - lo, 0.0, None) / (2.0 * self.half_widths)
        return min(float(np.prod(overlap)), 1.0), 0.0

    def differential_entropy(self) -> float:
        return float(np.sum(np.log(2.0 * self.half_widths)))

    def support_bounds(self, n_sigmas=GAUSSIAN_BOUNDS_SIGMAS):
        return self.center - self.half_widths, self.center + self.half_widths

    def support_diameter(self) -> float:
        return float(2.0 * np.max(self.half_widths))

    def to_block(self) -> Dict[str, str]:
        return {'kind': self.kind, 'center': _format(self.center), 'half_widths': _format(self.half_widths)}


@dataclass(frozen=True, eq=False)
class GridDensityNoise(NoiseModel):
    """Piecewise-constant density: cell i of ``partition`` carries mass weights[i]."""
    partition: GridPartition
    weights: np.ndarray
    kind: ClassVar[str] = "grid_density"

    def __post_init__(self):
        weights = _frozen_array(np.ravel(self.weights))
        if weights.size != self.partition.n_bounded:
            raise ModelDomainError(
                f"grid_density needs one weight per bounded cell ({self.partition.n_bounded}), got {weights.size}"
            )
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ModelDomainError("grid_density weights must be finite and non-negative")
        if abs(weights.sum() - 1.0) > GRID_WEIGHT_SUM_TOL:
            raise ModelDomainError(f"grid_density weights sum to {weights.sum()!r}, expected 1 within 1e-12")
        volumes = self.partition.cell_volumes()
        lows = np.empty((self.partition.n_bounded, self.partition.dim))
        highs = np.empty_like(lows)
        multi = np.unravel_index(np.arange(self.partition.n_bounded), self.partition.shape)
        for j in range(self.partition.dim):
            edges = self.partition.axis_edges(j)
            lows[:, j] = edges[multi[j]]
            highs[:, j] = edges[multi[j] + 1]
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, '_volumes', volumes)
        object.__setattr__(self, '_cell_density', weights / volumes)
        object.__setattr__(self, '_lows', lows)
        object.__setattr__(self, '_highs', highs)
        if self.partition.dim == 1:
            edges = self.partition.axis_edges(0)
            object.__setattr__(self, '_edges', edges)
            object.__setattr__(self, '_cdf', np.concatenate([[0.0], np.cumsum(weights)]))

    @classmethod
    def from_discrete(cls, dist: DiscreteDist) -> "GridDensityNoise":
        """Noise model from a discrete distribution whose overflow cell is empty."""
        if dist.overflow_mass > GRID_WEIGHT_SUM_TOL:
            raise ModelDomainError(
                f"cannot build a density from a distribution with overflow mass {dist.overflow_mass!r}"
            )
        bounded = dist.bounded_weights
        return cls(dist.partition, bounded / bounded.sum())

    def to_discrete(self) -> DiscreteDist:
        return DiscreteDist(self.partition, np.append(self.weights, 0.0))

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def mean(self) -> np.ndarray:
        centers = 0.5 * (self._lows + self._highs)
        return self.weights @ centers

    @property
    def covariance(self) -> np.ndarray:
        centers = 0.5 * (self._lows + self._highs)
        mu = self.weights @ centers
        second = (centers * self.weights[:, None]).T @ centers
        within = np.diag(self.weights @ ((self._highs - self._lows) ** 2 / 12.0))
        return second - np.outer(mu, mu) + within

    @property
    def is_product_form(self) -> bool:
        return self.dim == 1

    def log_densities(self, points: np.ndarray) -> np.ndarray:
        points = self._as_points(points)
        labels = self.partition.labels(points)
        out = np.full(points.shape[0], -np.inf)
        bounded = labels < self.partition.n_bounded
        with np.errstate(divide='ignore'):
            out[bounded] = np.log(self._cell_density[labels[bounded]])
        return out

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        n = 1 if size is None else size
        cells = rng.choice(self.partition.n_bounded, size=n, p=self.weights)
        u = rng.uniform(0.0, 1.0, size=(n, self.dim))
        draws = self._lows[cells] + u * (self._highs[cells] - self._lows[cells])
        return draws[0] if size is None else draws

    def _cdf_at(self, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self._edges, self._cdf, left=0.0, right=1.0)

    def axis_interval_masses(self, axis: int, edges: np.ndarray) -> np.ndarray:
        if self.dim != 1:
            return super().axis_interval_masses(axis, edges)
        return np.diff(self._cdf_at(np.asarray(edges, dtype=float)))

    def interval_masses(self, lows: np.ndarray, highs: np.ndarray) -> np.ndarray:
        """1-D mass of many intervals [lows[i], highs[i]] at once."""
        return np.clip(self._cdf_at(np.asarray(highs)) - self._cdf_at(np.asarray(lows)), 0.0, 1.0)

    def box_probability(self, center, eps, budget=DEFAULT_MC_BUDGET, rng=None):
        center = self._check_box_args(center, eps)
        if self.dim == 1:
            return float(self.interval_masses(center - eps, center + eps)[0]), 0.0
        lo = np.maximum(self._lows, center - eps)
        hi = np.minimum(self._highs, center + eps)
        fraction = np.prod(np.clip(hi - lo, 0.0, None) / (self._highs - self._lows), axis=1)
        return min(float(self.weights @ fraction), 1.0), 0.0

    def differential_entropy(self) -> float:
        w = self.weights
        positive = w > 0
        return float(np.sum(w[positive] * np.log(self._volumes[positive] / w[positive])))

    def support_bounds(self, n_sigmas=GAUSSIAN_BOUNDS_SIGMAS):
        positive = self.weights > 0
        return self._lows[positive].min(axis=0), self._highs[positive].max(axis=0)

    def support_diameter(self) -> float:
        lo, hi = self.support_bounds()
        return float(np.max(hi - lo))

    def to_block(self) -> Dict[str, str]:
        block = {'kind': self.kind}
        block.update(self.partition.to_block())
        block['weights'] = _format(self.weights)
        return block


# --- Operations ---

def density(model: NoiseModel, point) -> float:
    """q(point); zero outside the support of bounded kinds."""
    return model.density(point)


def sample(model: NoiseModel, stream: np.random.Generator) -> np.ndarray:
    """One i.i.d. draw from q; advancing ``stream`` is the only side effect."""
    return model.sample(stream)


def box_probability(
    model: NoiseModel,
    center,
    eps: float,
    budget: int = DEFAULT_MC_BUDGET,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """P(||W - center||_inf <= eps) with its standard error (0 when exact)."""
    return model.box_probability(center, eps, budget=budget, rng=rng)


def differential_entropy(model: NoiseModel) -> float:
    """H_d(q) in nats."""
    return model.differential_entropy()


def mc_differential_entropy(
    model: NoiseModel,
    n: int = DEFAULT_ENTROPY_SAMPLES,
    seed: int = 0,
) -> Tuple[float, float]:
    """Monte-Carlo estimate -(1/n) sum ln q(x_i) and its standard error."""
    if n < MIN_ENTROPY_SAMPLES:
        raise ConfigurationError(f"entropy estimate needs n >= {MIN_ENTROPY_SAMPLES}, got {n}")
    rng = child_rng(seed, ESTIMATOR)
    log_q = model.log_densities(model.sample(rng, size=n))
    if not np.all(np.isfinite(log_q)):
        raise SupportMismatchError(
            f"{np.count_nonzero(~np.isfinite(log_q))} samples drawn where the density is zero"
        )
    return float(-np.mean(log_q)), compute_standard_error(log_q)


def check_density_normalization(
    model: NoiseModel,
    n: int = DEFAULT_ENTROPY_SAMPLES,
    seed: int = 0,
    n_sigmas: float = 8.0,
) -> Tuple[float, float]:
    """Monte-Carlo estimate of the integral of q over its effective support box."""
    lower, upper = model.support_bounds(n_sigmas)
    volume = float(np.prod(upper - lower))
    rng = child_rng(seed, ESTIMATOR, 1)
    points = lower + (upper - lower) * rng.uniform(0.0, 1.0, size=(n, model.dim))
    values = volume * model.densities(points)
    return float(np.mean(values)), compute_standard_error(values)


def max_box_probability(
    model: NoiseModel,
    eps: float,
    budget: int = DEFAULT_MC_BUDGET,
    seed: int = 0,
) -> Tuple[float, np.ndarray, float]:
    """gamma = max_s P(||W - s||_inf <= eps), its maximizer and standard error.

    Symmetric unimodal laws peak at the mean. Other laws use a multistart
    search over positive-mass cell centres refined with Nelder-Mead.
    """
    if not eps > 0:
        raise ContractViolationError(f"eps must be positive, got {eps}")
    if model.is_symmetric_unimodal:
        rng = child_rng(seed, ESTIMATOR, 2)
        p, se = model.box_probability(model.mean, eps, budget=budget, rng=rng)
        return p, np.array(model.mean, dtype=float), se
    if not isinstance(model, GridDensityNoise):
        raise UnsupportedMethodError(f"no gamma search for {type(model).__name__}")

    centers = model.partition.cell_centers()[model.weights > 0]
    if model.dim == 1:
        scores = model.interval_masses(centers[:, 0] - eps, centers[:, 0] + eps)
    else:
        top = np.argsort(model.weights[model.weights > 0])[::-1][:_GAMMA_CANDIDATES]
        centers = centers[top]
        scores = np.array([model.box_probability(c, eps)[0] for c in centers])
    order = np.argsort(scores)[::-1][:_GAMMA_REFINE]
    best_p, best_center = float(scores[order[0]]), centers[order[0]].copy()
    for idx in order:
        result = minimize(
            lambda s: -model.box_probability(s, eps)[0],
            centers[idx],
            method='Nelder-Mead',
            options={'xatol': eps * 1e-4, 'fatol': 1e-12},
        )
        if -result.fun > best_p:
            best_p, best_center = float(-result.fun), np.asarray(result.x, dtype=float)
    return min(best_p, 1.0), best_center, 0.0
