"""Grid partitions of R^d, label functions and discrete distributions.

A ``GridPartition`` splits the box ``[lower, upper)`` into axis-aligned cells
of width ``cell_width`` (the last cell on an axis is clipped at ``upper``) and
adds one overflow cell holding everything outside the box. Cells are closed
at their lower face and open at their upper face.

Architecture: Pure NumPy/SciPy. No I/O.
"""
from dataclasses import dataclass
from functools import reduce
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr, rel_entr

from config import GAUSSIAN_BOUNDS_SIGMAS, WEIGHT_SUM_TOL
from core.errors import ContractViolationError, ModelDomainError, UnsupportedMethodError
from core.seeding import child_rng, ESTIMATOR

# Slack for ceil((upper - lower) / width) when the ratio is an integer up to rounding
_COUNT_SLACK = 1e-9


def _as_vector(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float, ndmin=1)
    if array.ndim != 1:
        raise ModelDomainError(f"{name} must be a vector, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GridPartition:
    """Axis-aligned grid over ``[lower, upper)`` plus one overflow cell."""
    lower: np.ndarray
    upper: np.ndarray
    cell_width: np.ndarray

    def __post_init__(self):
        lower = _as_vector(self.lower, "lower")
        upper = _as_vector(self.upper, "upper")
        width = _as_vector(self.cell_width, "cell_width")
        if width.size == 1 and lower.size > 1:
            width = _as_vector(np.full(lower.size, width[0]), "cell_width")
        if not (lower.size == upper.size == width.size):
            raise ContractViolationError(
                f"partition bounds and widths disagree in dimension: {lower.size}, {upper.size}, {width.size}"
            )
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ModelDomainError("partition bounds must be finite")
        if np.any(upper <= lower):
            raise ModelDomainError("partition upper bounds must exceed lower bounds")
        if np.any(width <= 0) or not np.all(np.isfinite(width)):
            raise ModelDomainError("cell widths must be positive and finite")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'cell_width', width)
        counts = np.maximum(1, np.ceil((upper - lower) / width - _COUNT_SLACK)).astype(int)
        object.__setattr__(self, '_shape', tuple(int(c) for c in counts))

    # --- Construction ---

    @classmethod
    def around(cls, model, cell_width, n_sigmas: float = GAUSSIAN_BOUNDS_SIGMAS) -> "GridPartition":
        """Grid covering the effective support of a noise model.

        Unbounded models are cut at ``n_sigmas`` standard deviations per axis,
        which keeps at least 1 - 1e-6 of the mass inside for the default of 6.
        """
        lower, upper = model.support_bounds(n_sigmas)
        return cls(lower, upper, cell_width)

    # --- Properties ---

    @property
    def dim(self) -> int:
        return int(self.lower.size)

    @property
    def origin(self) -> np.ndarray:
        return self.lower

    @property
    def shape(self) -> Tuple[int, ...]:
        """Number of bounded cells per axis."""
        return self._shape

    @property
    def n_bounded(self) -> int:
        return int(np.prod(self._shape))

    @property
    def n_cells(self) -> int:
        """Bounded cells plus the overflow cell."""
        return self.n_bounded + 1

    @property
    def overflow_index(self) -> int:
        return self.n_bounded

    @property
    def diameter(self) -> float:
        """Largest infinity-norm diameter over the bounded cells."""
        return float(np.max(np.minimum(self.cell_width, self.upper - self.lower)))

    def axis_edges(self, axis: int) -> np.ndarray:
        """Cell edges along one axis, the last edge clipped at ``upper``."""
        n = self._shape[axis]
        edges = self.lower[axis] + self.cell_width[axis] * np.arange(n + 1)
        edges[-1] = self.upper[axis]
        return edges

    def axis_centers(self, axis: int) -> np.ndarray:
        edges = self.axis_edges(axis)
        return 0.5 * (edges[:-1] + edges[1:])

    def cell_volumes(self) -> np.ndarray:
        """Lebesgue volume of every bounded cell, in flat index order."""
        widths = [np.diff(self.axis_edges(j)) for j in range(self.dim)]
        return reduce(np.multiply.outer, widths).ravel()

    # --- Labelling ---

    def labels(self, points: np.ndarray) -> np.ndarray:
        """Cell index of every row of an (N, d) array."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, self.dim) if self.dim == 1 else points.reshape(1, -1)
        if points.shape[1] != self.dim:
            raise ContractViolationError(f"points have dimension {points.shape[1]}, partition has {self.dim}")
        inside = np.all((points >= self.lower) & (points < self.upper), axis=1)
        labels = np.full(points.shape[0], self.overflow_index, dtype=np.int64)
        if np.any(inside):
            # cells are closed at their lower edge, so search on the reported edges
            rel = np.stack([
                np.searchsorted(self.axis_edges(j), points[inside, j], side='right') - 1
                for j in range(self.dim)
            ], axis=1)
            rel = np.clip(rel, 0, np.asarray(self._shape) - 1)
            labels[inside] = np.ravel_multi_index(tuple(rel.T), self._shape)
        return labels

    def label(self, point: np.ndarray) -> int:
        """Index of the unique cell containing ``point``."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            raise ContractViolationError(f"point has shape {point.shape}, partition dimension is {self.dim}")
        return int(self.labels(point.reshape(1, -1))[0])

    # --- Cell geometry ---

    def _check_bounded(self, index: int) -> Tuple[int, ...]:
        if not 0 <= index < self.n_bounded:
            raise ContractViolationError(f"cell {index} is not a bounded cell of this partition")
        return np.unravel_index(index, self._shape)

    def cell_bounds(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper corner of a bounded cell."""
        multi = self._check_bounded(index)
        lo = np.array([self.axis_edges(j)[multi[j]] for j in range(self.dim)])
        hi = np.array([self.axis_edges(j)[multi[j] + 1] for j in range(self.dim)])
        return lo, hi

    def cell_center(self, index: int) -> np.ndarray:
        lo, hi = self.cell_bounds(index)
        return 0.5 * (lo + hi)

    def cell_centers(self) -> np.ndarray:
        """(n_bounded, d) array of cell centers in flat index order."""
        grids = np.meshgrid(*[self.axis_centers(j) for j in range(self.dim)], indexing='ij')
        return np.stack([g.ravel() for g in grids], axis=1)

    def same_as(self, other: "GridPartition") -> bool:
        return (
            self.dim == other.dim
            and self._shape == other._shape
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.cell_width, other.cell_width)
        )

    # --- Config block ---

    def to_block(self) -> Dict[str, str]:
        return {
            'lower': ", ".join(repr(float(v)) for v in self.lower),
            'upper': ", ".join(repr(float(v)) for v in self.upper),
            'cell_width': ", ".join(repr(float(v)) for v in self.cell_width),
        }


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Probability vector over the cells of a partition, overflow cell last."""
    partition: GridPartition
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.size != self.partition.n_cells:
            raise ContractViolationError(
                f"expected {self.partition.n_cells} weights (including overflow), got {weights.size}"
            )
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ModelDomainError("weights must be finite and non-negative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ModelDomainError(f"weights sum to {weights.sum()!r}, expected 1")
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)

    @property
    def overflow_mass(self) -> float:
        return float(self.weights[-1])

    @property
    def bounded_weights(self) -> np.ndarray:
        return self.weights[:-1]

    @property
    def support_size(self) -> int:
        """Number of cells with positive mass."""
        return int(np.count_nonzero(self.weights))

    def to_rows(self):
        """``(cell_index, weight)`` rows for CSV export."""
        return [(i, float(w)) for i, w in enumerate(self.weights)]


def _check_same_partition(p: DiscreteDist, r: DiscreteDist) -> None:
    if p.partition is not r.partition and not p.partition.same_as(r.partition):
        raise ContractViolationError("distributions are defined on different partitions")


# --- Operations ---

def label(partition: GridPartition, point: np.ndarray) -> int:
    """Label function: the index of the cell containing ``point``."""
    return partition.label(point)


def discretize(
    model,
    partition: GridPartition,
    method: str = "analytic",
    n: int = 100_000,
    seed: Optional[int] = None,
) -> DiscreteDist:
    """Integrate a noise density over every cell of ``partition``.

    Parameters
    ----------
    model : NoiseModel
        The noise law to discretize.
    partition : GridPartition
        Target partition, same dimension as the model.
    method : str
        ``"analytic"`` (product-form models only) or ``"monte_carlo"``.
    n, seed :
        Sample count and seed for the Monte-Carlo method.
    """
    if model.dim != partition.dim:
        raise ContractViolationError(f"model dimension {model.dim} != partition dimension {partition.dim}")
    if method == "analytic":
        if not model.is_product_form:
            raise UnsupportedMethodError(
                f"analytic discretization needs a product-form model, got {type(model).__name__}"
            )
        masses = [model.axis_interval_masses(j, partition.axis_edges(j)) for j in range(partition.dim)]
        bounded = reduce(np.multiply.outer, masses).ravel()
        bounded = np.clip(bounded, 0.0, None)
        overflow = max(0.0, 1.0 - float(bounded.sum()))
        weights = np.append(bounded, overflow)
        return DiscreteDist(partition, weights / weights.sum())
    if method == "monte_carlo":
        if n < 1:
            raise UnsupportedMethodError("monte_carlo discretization needs n >= 1")
        rng = child_rng(0 if seed is None else seed, ESTIMATOR)
        samples = model.sample(rng, size=n)
        return empirical_type(partition, samples)
    raise UnsupportedMethodError(f"unknown discretization method: {method!r}")


def shannon_entropy(dist: DiscreteDist) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    return float(np.sum(entr(dist.weights)))


def kl_divergence(p: DiscreteDist, r: DiscreteDist) -> float:
    """KL(p || r) in nats; +inf when p charges a cell r does not."""
    _check_same_partition(p, r)
    return float(np.sum(rel_entr(p.weights, r.weights)))


def cross_entropy(p: DiscreteDist, r: DiscreteDist) -> float:
    """-sum p ln r, equal to H(p) + KL(p || r)."""
    _check_same_partition(p, r)
    return shannon_entropy(p) + kl_divergence(p, r)


def total_variation(p: DiscreteDist, r: DiscreteDist) -> float:
    _check_same_partition(p, r)
    return 0.5 * float(np.sum(np.abs(p.weights - r.weights)))


def empirical_type(partition: GridPartition, samples: Sequence) -> DiscreteDist:
    """Cell-frequency vector of a sample sequence."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ContractViolationError("empirical type needs at least one sample")
    if samples.ndim == 1:
        samples = samples.reshape(-1, partition.dim)
    counts = np.bincount(partition.labels(samples), minlength=partition.n_cells)
    return DiscreteDist(partition, counts / counts.sum())
