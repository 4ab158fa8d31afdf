"""Experiment configuration read from an INI-style file.

Sections: ``[experiment]``, ``[system]``, ``[noise]``, ``[predictor]``,
``[partition]`` (optional) and ``[design]`` (optional). Command-line flags
override file values.
"""
import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Tuple, Union

from config import (
    DEFAULT_CAP_SIGMAS,
    DEFAULT_DESIGN_GRID,
    DEFAULT_DESIGN_MAX_ITER,
    DEFAULT_DESIGN_TOL,
    DEFAULT_EPS,
    DEFAULT_HORIZON,
    DEFAULT_MC_BUDGET,
    DEFAULT_N_TRAJ,
    DEFAULT_ONE_STEP_RADIUS,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    MISMATCH_GRID,
)
from core.designer import DesignProblem
from core.errors import ConfigurationError
from core.partition import GridPartition
from core.predictors import PredictorSpec
from core.sds_sim import SystemModel
from harness.blocks import (
    noise_from_block,
    parse_vector,
    partition_from_block,
    predictor_from_block,
    system_from_block,
)
from logger import logger

# Sections filled in when the file omits them: the 2-D gaussian figure setup
DEFAULT_BLOCKS = {
    'system': {'F': 'random(1, 0.9)'},
    'noise': {'kind': 'gaussian', 'dim': '2', 'mean': '0', 'cov': 'random(2)'},
    'predictor': {'predictor': 'optimal'},
}


@dataclass(frozen=True)
class DesignSettings:
    """Inputs of the ``design`` command."""
    sigma: float = 1.0
    cap: Optional[float] = None
    grid_resolution: int = DEFAULT_DESIGN_GRID
    tolerance: float = DEFAULT_DESIGN_TOL
    max_iter: int = DEFAULT_DESIGN_MAX_ITER
    r: float = DEFAULT_ONE_STEP_RADIUS

    def problem(self) -> DesignProblem:
        cap = DEFAULT_CAP_SIGMAS * self.sigma if self.cap is None else self.cap
        return DesignProblem(self.sigma, cap, self.grid_resolution, self.tolerance, self.max_iter)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    system: SystemModel
    predictor: PredictorSpec
    eps: float = DEFAULT_EPS
    K: int = DEFAULT_HORIZON
    n_traj: int = DEFAULT_N_TRAJ
    seed: int = DEFAULT_SEED
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    budget: int = DEFAULT_MC_BUDGET
    workers: int = DEFAULT_WORKERS
    taus: Tuple[float, ...] = MISMATCH_GRID
    etas: Tuple[float, ...] = MISMATCH_GRID
    partition: Optional[GridPartition] = None
    design: DesignSettings = field(default_factory=DesignSettings)

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if self.n_traj < 1:
            raise ConfigurationError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        if self.budget < 1:
            raise ConfigurationError(f"budget must be >= 1, got {self.budget}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")


def _get(section: Mapping[str, str], key: str, convert, default):
    if key not in section:
        return default
    try:
        return convert(section[key])
    except ValueError as e:
        raise ConfigurationError(f"invalid value for {key!r}: {section[key]!r}") from e


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in parse_vector(text))


def read_parser(path: Optional[Union[str, Path]]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep F and B upper case
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            with open(path, encoding='utf-8') as handle:
                parser.read_file(handle)
        except configparser.Error as e:
            raise ConfigurationError(f"cannot parse {path}: {e}") from e
    # Missing sections fall back whole, never key by key
    for name, block in DEFAULT_BLOCKS.items():
        if not parser.has_section(name):
            parser.read_dict({name: block})
    return parser


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, object]] = None) -> ExperimentConfig:
    """Read ``path`` (or the built-in defaults) and apply command-line overrides.

    ``overrides`` keys are ``seed``, ``output_dir``, ``workers`` and ``budget``;
    ``None`` values are ignored.
    """
    parser = read_parser(path)
    experiment = parser['experiment'] if parser.has_section('experiment') else {}
    noise_section = dict(parser['noise'])
    system_section = dict(parser['system'])
    noise = noise_from_block(noise_section, dim=int(system_section['dim']) if 'dim' in system_section else None)
    system = system_from_block(system_section, noise)
    predictor = predictor_from_block(parser['predictor'].get('predictor', 'optimal'), system)
    partition = partition_from_block(dict(parser['partition']), noise) if parser.has_section('partition') else None

    design = DesignSettings()
    if parser.has_section('design'):
        section = parser['design']
        design = DesignSettings(
            sigma=_get(section, 'sigma', float, design.sigma),
            cap=_get(section, 'cap', float, design.cap),
            grid_resolution=_get(section, 'grid_resolution', int, design.grid_resolution),
            tolerance=_get(section, 'tolerance', float, design.tolerance),
            max_iter=_get(section, 'max_iter', int, design.max_iter),
            r=_get(section, 'r', float, design.r),
        )

    values = {
        'eps': _get(experiment, 'eps', float, DEFAULT_EPS),
        'K': _get(experiment, 'K', int, DEFAULT_HORIZON),
        'n_traj': _get(experiment, 'n_traj', int, DEFAULT_N_TRAJ),
        'seed': _get(experiment, 'seed', int, DEFAULT_SEED),
        'output_dir': _get(experiment, 'output_dir', Path, Path(DEFAULT_OUTPUT_DIR)),
        'budget': _get(experiment, 'budget', int, DEFAULT_MC_BUDGET),
        'workers': _get(experiment, 'workers', int, DEFAULT_WORKERS),
        'taus': _get(experiment, 'taus', _floats, MISMATCH_GRID),
        'etas': _get(experiment, 'etas', _floats, MISMATCH_GRID),
    }
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = Path(value) if key == 'output_dir' else value

    config = ExperimentConfig(system=system, predictor=predictor, partition=partition, design=design, **values)
    logger.debug(f"Loaded config from {path or 'defaults'}: eps={config.eps}, K={config.K}, n_traj={config.n_traj}")
    return config
