"""Plain-text blocks describing noise laws, systems, partitions and predictors.

Values are comma-separated numbers; matrices are row-major. ``random(seed)``
draws a mean or a spectral-radius-1 covariance, ``random(seed, rho)`` a
system matrix with spectral radius ``rho``.
"""
import re
from typing import Dict, Mapping, Optional

import numpy as np

from config import DEFAULT_RANDOM_SPECTRAL_RADIUS, GAUSSIAN_BOUNDS_SIGMAS
from core.errors import ConfigurationError
from core.noise_models import GaussianNoise, GridDensityNoise, NoiseModel, UniformBoxNoise
from core.partition import GridPartition
from core.predictors import (
    PredictorSpec,
    deterministic_predictor,
    mean_predictor,
    mismatched_gaussian_predictor,
    optimal_predictor,
)
from core.sds_sim import SystemModel, random_covariance, random_matrix, random_mean

_RANDOM = re.compile(r"^random\(\s*(\d+)\s*(?:,\s*([-+0-9.eE]+)\s*)?\)$")
_CALL = re.compile(r"^(\w+)\s*(?:\((.*)\))?$")


def parse_vector(text: str) -> np.ndarray:
    """``"1, 2.5, -3"`` -> array([1.0, 2.5, -3.0])."""
    try:
        values = [float(part) for part in str(text).replace(';', ',').split(',') if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"cannot parse numbers from {text!r}") from e
    if not values:
        raise ConfigurationError("empty numeric list")
    return np.array(values)


def parse_matrix(text: str, dim: int) -> np.ndarray:
    """Row-major list of dim * dim numbers (a single number means that times I)."""
    values = parse_vector(text)
    if values.size == 1:
        return values[0] * np.eye(dim)
    if values.size != dim * dim:
        raise ConfigurationError(f"expected {dim * dim} matrix entries, got {values.size}")
    return values.reshape(dim, dim)


def _random_args(text: str):
    match = _RANDOM.match(str(text).strip())
    if not match:
        return None
    seed = int(match.group(1))
    extra = float(match.group(2)) if match.group(2) is not None else None
    return seed, extra


def _dim(block: Mapping[str, str], dim: Optional[int]) -> Optional[int]:
    if 'dim' in block:
        return int(block['dim'])
    return dim


# --- Noise ---

def noise_from_block(block: Mapping[str, str], dim: Optional[int] = None) -> NoiseModel:
    """Build a noise model from its block; ``dim`` fills in random or default entries."""
    kind = block.get('kind', 'gaussian').strip()
    dim = _dim(block, dim)
    if kind == 'gaussian':
        if dim is None:
            if 'mean' in block and _random_args(block['mean']) is None:
                dim = parse_vector(block['mean']).size
            else:
                raise ConfigurationError("gaussian noise needs 'dim' or an explicit mean")
        mean_text = block.get('mean', '0')
        random_args = _random_args(mean_text)
        if random_args is not None:
            mean = random_mean(dim, random_args[0])
        else:
            mean = parse_vector(mean_text)
            if mean.size == 1:
                mean = np.full(dim, mean[0])
        cov_text = block.get('cov', '1')
        random_args = _random_args(cov_text)
        if random_args is not None:
            cov = random_covariance(dim, random_args[0])
        else:
            cov = parse_matrix(cov_text, dim)
        return GaussianNoise(mean, cov)
    if kind == 'uniform_box':
        if 'half_widths' not in block:
            raise ConfigurationError("uniform_box noise needs 'half_widths'")
        half = parse_vector(block['half_widths'])
        center = parse_vector(block.get('center', '0'))
        size = max(half.size, center.size, dim or 1)
        if center.size == 1:
            center = np.full(size, center[0])
        return UniformBoxNoise(center, half)
    if kind == 'grid_density':
        missing = [key for key in ('lower', 'upper', 'cell_width', 'weights') if key not in block]
        if missing:
            raise ConfigurationError(f"grid_density noise is missing {', '.join(missing)}")
        partition = GridPartition(
            parse_vector(block['lower']), parse_vector(block['upper']), parse_vector(block['cell_width'])
        )
        return GridDensityNoise(partition, parse_vector(block['weights']))
    raise ConfigurationError(f"unknown noise kind: {kind!r}")


def noise_to_block(model: NoiseModel) -> Dict[str, str]:
    return model.to_block()


# --- System ---

def system_from_block(block: Mapping[str, str], noise: NoiseModel) -> SystemModel:
    """Linear system from ``F`` (list or random(seed, rho)) and optional ``B``."""
    dim = noise.dim
    if 'dim' in block and int(block['dim']) != dim:
        raise ConfigurationError(f"system dim {block['dim']} does not match noise dimension {dim}")
    f_text = block.get('F', f'random(0, {DEFAULT_RANDOM_SPECTRAL_RADIUS!r})')
    random_args = _random_args(f_text)
    if random_args is not None:
        seed, rho = random_args
        F = random_matrix(dim, seed, DEFAULT_RANDOM_SPECTRAL_RADIUS if rho is None else rho)
    else:
        F = parse_matrix(f_text, dim)
    B = None
    if 'B' in block:
        values = parse_vector(block['B'])
        if values.size % dim:
            raise ConfigurationError(f"B must have a multiple of {dim} entries, got {values.size}")
        B = values.reshape(dim, -1)
    return SystemModel.linear(F, noise, B=B)


# --- Partition ---

def partition_from_block(block: Mapping[str, str], noise: NoiseModel) -> GridPartition:
    """Grid from ``cell_width`` plus ``lower``/``upper`` or ``bounds_sigmas``."""
    if 'cell_width' not in block:
        raise ConfigurationError("partition block needs 'cell_width'")
    width = parse_vector(block['cell_width'])
    if 'lower' in block or 'upper' in block:
        if not ('lower' in block and 'upper' in block):
            raise ConfigurationError("partition needs both 'lower' and 'upper'")
        return GridPartition(parse_vector(block['lower']), parse_vector(block['upper']), width)
    n_sigmas = float(block.get('bounds_sigmas', GAUSSIAN_BOUNDS_SIGMAS))
    return GridPartition.around(noise, width, n_sigmas)


def partition_to_block(partition: GridPartition) -> Dict[str, str]:
    return partition.to_block()


# --- Predictor ---

def predictor_from_block(text: str, system: SystemModel) -> PredictorSpec:
    """``optimal | mean | mismatch(tau, eta) | deterministic(p1, ..., pd)``."""
    match = _CALL.match(str(text).strip())
    if not match:
        raise ConfigurationError(f"cannot parse predictor descriptor {text!r}")
    name, args = match.group(1), match.group(2)
    if name == 'optimal' and not args:
        return optimal_predictor(system)
    if name == 'mean' and not args:
        return mean_predictor(system)
    if name == 'mismatch' and args:
        values = parse_vector(args)
        if values.size != 2:
            raise ConfigurationError(f"mismatch takes (tau, eta), got {args!r}")
        return mismatched_gaussian_predictor(system, float(values[0]), float(values[1]))
    if name == 'deterministic' and args:
        return deterministic_predictor(system, parse_vector(args))
    raise ConfigurationError(f"unknown predictor descriptor {text!r}")


def predictor_to_block(predictor: PredictorSpec) -> str:
    if predictor.name == 'deterministic':
        return "deterministic(" + ", ".join(repr(float(v)) for v in predictor.point) + ")"
    return predictor.name
