"""CSV and config-block writers.

Floats are written with ``repr`` (shortest round-trip form) so repeated
runs produce byte-identical files.
"""
import configparser
import csv
from pathlib import Path
from typing import Dict, Iterable, Mapping, Sequence

import numpy as np

from core.metrics import MetricsReport
from core.partition import DiscreteDist
from core.sds_sim import Trajectory
from logger import logger


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info(f"Wrote {path}")
    return path


def write_trajectories(path: Path, trajectories: Sequence[Trajectory]) -> Path:
    """Rows ``trajectory, k, x_1..x_d, w_1..w_d``; the w columns are empty on row k = K."""
    d = trajectories[0].dim
    header = ['trajectory', 'k'] + [f'x_{j}' for j in range(1, d + 1)] + [f'w_{j}' for j in range(1, d + 1)]
    rows = []
    for i, trajectory in enumerate(trajectories):
        states = trajectory.all_states
        for k in range(trajectory.K + 1):
            noise = list(trajectory.noises[k]) if k < trajectory.K else [None] * d
            rows.append([i, k] + list(states[k]) + noise)
    return write_csv(path, header, rows)


def write_distribution(path: Path, dist: DiscreteDist) -> Path:
    """Rows ``cell_index, weight``, overflow cell last."""
    return write_csv(path, ['cell_index', 'weight'], dist.to_rows())


def write_rates(path: Path, report: MetricsReport) -> Path:
    return write_csv(path, ['trajectory_id', 'rate'], enumerate(report.per_trajectory_rates))


def write_summary(path: Path, summary: Mapping[str, object]) -> Path:
    return write_csv(path, ['key', 'value'], summary.items())


def write_series(path: Path, series: Mapping[str, np.ndarray], index_name: str = 'k') -> Path:
    """Columns ``k`` (1-based step count) then one column per named series."""
    names = list(series)
    length = len(next(iter(series.values())))
    rows = ([k + 1] + [series[name][k] for name in names] for k in range(length))
    return write_csv(path, [index_name] + names, rows)


def write_block(path: Path, section: str, block: Dict[str, str]) -> Path:
    """Write one config section, readable back by the experiment config loader."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser[section] = block
    with open(path, 'w', encoding='utf-8') as handle:
        parser.write(handle)
    logger.info(f"Wrote {path}")
    return path
