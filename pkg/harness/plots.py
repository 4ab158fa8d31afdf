"""Static SVG line charts drawn from the same arrays written to CSV."""
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from config import PLOT_COLORMAP, PLOT_FIGSIZE, PLOT_FORMAT, PLOT_REFERENCE_STYLE
from core.sds_sim import Trajectory
from logger import logger


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # No date stamp so reruns give the same file
    fig.savefig(path, format=PLOT_FORMAT, metadata={'Date': None})
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_running_rates(
    path: Path,
    series: Mapping[str, np.ndarray],
    reference: Optional[float] = None,
    title: str = "",
) -> Path:
    """Running rate against k, one line per series, optional horizontal reference."""
    fig, ax = plt.subplots(figsize=PLOT_FIGSIZE)
    colormap = plt.colormaps.get_cmap(PLOT_COLORMAP)
    n = max(1, len(series))
    for i, (label, values) in enumerate(series.items()):
        ax.plot(np.arange(1, len(values) + 1), values, label=label, color=colormap(i / n))
    if reference is not None:
        ax.axhline(reference, label=f"d ln(2 eps) - H_d(q) = {reference:.4f}", **PLOT_REFERENCE_STYLE)
    ax.set_xlabel("k")
    ax.set_ylabel("running rate")
    if title:
        ax.set_title(title)
    ax.legend(loc='best', fontsize='small')
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_states(path: Path, trajectories: Sequence[Trajectory], title: str = "") -> Path:
    """Phase-plane paths of the first two state coordinates (time series in 1-D)."""
    fig, ax = plt.subplots(figsize=PLOT_FIGSIZE)
    colormap = plt.colormaps.get_cmap(PLOT_COLORMAP)
    n = max(1, len(trajectories))
    for i, trajectory in enumerate(trajectories):
        states = trajectory.all_states
        color = colormap(i / n)
        if trajectory.dim >= 2:
            ax.plot(states[:, 0], states[:, 1], color=color, linewidth=0.8, label=f"trajectory {i}")
        else:
            ax.plot(np.arange(len(states)), states[:, 0], color=color, linewidth=0.8, label=f"trajectory {i}")
    ax.set_xlabel("x_1" if trajectories and trajectories[0].dim >= 2 else "k")
    ax.set_ylabel("x_2" if trajectories and trajectories[0].dim >= 2 else "x_1")
    if title:
        ax.set_title(title)
    ax.legend(loc='best', fontsize='small')
    return _save(fig, path)


def plot_design(path: Path, centers: np.ndarray, densities: Mapping[str, np.ndarray], title: str = "") -> Path:
    """Designed density next to reference densities on the design grid."""
    fig, ax = plt.subplots(figsize=PLOT_FIGSIZE)
    colormap = plt.colormaps.get_cmap(PLOT_COLORMAP)
    n = max(1, len(densities))
    for i, (label, values) in enumerate(densities.items()):
        ax.plot(centers, values, label=label, color=colormap(i / n))
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend(loc='best', fontsize='small')
    return _save(fig, path)
