"""Experiment commands run by the CLI.

Each command takes an ``ExperimentConfig``, writes its artifacts under
``config.output_dir`` and returns the paths it wrote.
"""
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from config import (
    DESIGN_DIST_CSV,
    DESIGN_NOISE_INI,
    DESIGN_WEIGHTS_CSV,
    EQUIVALENCE_CSV,
    FIG1_RATE_CSV,
    FIG1_STATES_CSV,
    FIG2_ETA_CSV,
    FIG2_SUMMARY_CSV,
    FIG2_TAU_CSV,
    FIGURE_N_TRAJ,
    NOISE_DIST_CSV,
    PLOT_FORMAT,
    RATES_CSV,
    RUNNING_RATE_CSV,
    SUMMARY_CSV,
    TRAJECTORIES_CSV,
)
from core.designer import analytic_design, default_candidates, density_sup_distance, equivalence_check, numeric_design
from core.errors import ConfigurationError
from core.metrics import MetricsReport, discretize_law, exponent_approx, expected_rate
from core.predictors import mean_predictor, mismatched_gaussian_predictor, optimal_predictor
from core.sds_sim import seeded_trajectory
from harness.experiment_config import ExperimentConfig
from harness.export import (
    write_block,
    write_csv,
    write_distribution,
    write_rates,
    write_series,
    write_summary,
    write_trajectories,
)
from harness.plots import plot_design, plot_running_rates, plot_states
from logger import logger


def _svg(path: Path) -> Path:
    return path.with_suffix(f".{PLOT_FORMAT}")


def _mean_curve(report: MetricsReport) -> np.ndarray:
    """Mean running rate over the trajectories of a report."""
    return report.running_rates.mean(axis=0)


def _evaluate(config: ExperimentConfig, predictor, n_traj: int) -> MetricsReport:
    return expected_rate(
        config.system, predictor, config.eps, config.K, n_traj, config.seed,
        budget=config.budget, workers=config.workers, keep_running=True,
    )


# --- Commands ---

def run_simulate(config: ExperimentConfig) -> List[Path]:
    trajectories = [seeded_trajectory(config.system, config.K, config.seed, i) for i in range(config.n_traj)]
    return [write_trajectories(config.output_dir / TRAJECTORIES_CSV, trajectories)]


def run_evaluate(config: ExperimentConfig) -> List[Path]:
    report = expected_rate(
        config.system, config.predictor, config.eps, config.K, config.n_traj, config.seed,
        budget=config.budget, workers=config.workers, keep_running=True, partition=config.partition,
    )
    out = config.output_dir
    summary = report.summary()
    print(f"mean_rate = {report.mean_rate!r} +- {report.ci_halfwidth!r} (exponent_approx = {report.exponent_approx!r})")
    paths = [
        write_rates(out / RATES_CSV, report),
        write_summary(out / SUMMARY_CSV, summary),
        write_series(out / RUNNING_RATE_CSV, {'running_rate': _mean_curve(report)}),
    ]
    if config.partition is not None:
        q_disc = discretize_law(config.system.noise, config.partition, config.seed)
        paths.append(write_distribution(out / NOISE_DIST_CSV, q_disc))
    return paths


def run_exponent(config: ExperimentConfig) -> List[Path]:
    print(repr(exponent_approx(config.system, config.eps)))
    return []


def run_design(config: ExperimentConfig) -> List[Path]:
    settings = config.design
    problem = settings.problem()
    result = numeric_design(problem)
    uniform = analytic_design(problem.sigma)
    out = config.output_dir

    centers = result.centers
    rows = [(i, c, w) for i, (c, w) in enumerate(zip(centers, result.weights))]
    paths = [write_csv(out / DESIGN_WEIGHTS_CSV, ['cell', 'center', 'weight'], rows)]
    paths.append(write_block(out / DESIGN_NOISE_INI, 'noise', result.noise.to_block()))
    paths.append(write_distribution(out / DESIGN_DIST_CSV, result.dist))

    report = equivalence_check(problem.sigma, settings.r, default_candidates(problem.sigma) + [("numeric", result.noise)])
    paths.append(write_csv(
        out / EQUIVALENCE_CSV,
        ['candidate', 'one_step_value', 'entropy', 'value_rank', 'entropy_rank'],
        report.rows(),
    ))
    densities = {
        'numeric design': result.noise.densities(centers),
        'uniform': uniform.densities(centers),
    }
    paths.append(plot_design(_svg(out / DESIGN_WEIGHTS_CSV), centers, densities, title="Designed noise density"))

    print(f"entropy = {result.entropy!r} (uniform: {uniform.differential_entropy()!r})")
    print(f"residuals = {result.residuals}, lambdas = {result.lambdas}, converged = {result.converged}")
    print(f"sup |q - uniform| = {density_sup_distance(result.noise, uniform)!r}")
    print(f"leader by one-step value: {report.leader_by_value}; by entropy: {report.leader_by_entropy}")
    return paths


def run_fig1(config: ExperimentConfig) -> List[Path]:
    """Running rates of the optimal predictor on a few seeded trajectories."""
    predictor = optimal_predictor(config.system)
    report = _evaluate(config, predictor, FIGURE_N_TRAJ)
    reference = report.exponent_approx
    out = config.output_dir

    series = {f"trajectory_{i}": report.running_rates[i] for i in range(FIGURE_N_TRAJ)}
    series['reference'] = np.full(config.K, reference)
    trajectories = [seeded_trajectory(config.system, config.K, config.seed, i) for i in range(FIGURE_N_TRAJ)]
    curves = {name: values for name, values in series.items() if name != 'reference'}
    paths = [
        write_series(out / FIG1_RATE_CSV, series),
        write_trajectories(out / FIG1_STATES_CSV, trajectories),
        plot_running_rates(_svg(out / FIG1_RATE_CSV), curves, reference, title="Optimal predictor"),
        plot_states(_svg(out / FIG1_STATES_CSV), trajectories, title="Seeded trajectories"),
    ]
    finals = ", ".join(f"{report.running_rates[i][-1]:.4f}" for i in range(FIGURE_N_TRAJ))
    print(f"reference = {reference!r}; final running rates: {finals}")
    return paths


def run_fig2(config: ExperimentConfig) -> List[Path]:
    """Mismatch sweeps: tau at eta = 0 and eta at tau = 0."""
    out = config.output_dir
    summary_rows = []
    paths = []
    for name, values, csv_name in (('tau', config.taus, FIG2_TAU_CSV), ('eta', config.etas, FIG2_ETA_CSV)):
        curves = {}
        for value in values:
            tau, eta = (value, 0.0) if name == 'tau' else (0.0, value)
            predictor = mismatched_gaussian_predictor(config.system, tau, eta)
            report = _evaluate(config, predictor, config.n_traj)
            curves[f"{name}={value!r}"] = _mean_curve(report)
            summary_rows.append((predictor.name, tau, eta, report.mean_rate, report.ci_halfwidth, report.n_degenerate))
        paths.append(write_series(out / csv_name, curves))
        paths.append(plot_running_rates(
            _svg(out / csv_name), curves, exponent_approx(config.system, config.eps), title=f"Effect of {name}",
        ))

    baseline = mean_predictor(config.system)
    report = _evaluate(config, baseline, config.n_traj)
    summary_rows.append((baseline.name, None, None, report.mean_rate, report.ci_halfwidth, report.n_degenerate))
    paths.append(write_csv(
        out / FIG2_SUMMARY_CSV,
        ['predictor', 'tau', 'eta', 'mean_rate', 'ci', 'n_degenerate'],
        summary_rows,
    ))
    return paths


COMMANDS: Dict[str, Callable[[ExperimentConfig], List[Path]]] = {
    'simulate': run_simulate,
    'evaluate': run_evaluate,
    'exponent': run_exponent,
    'design': run_design,
    'fig1': run_fig1,
    'fig2': run_fig2,
}


def run(config: ExperimentConfig, command: str) -> List[Path]:
    """Dispatch ``command``; returns the artifact paths."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    logger.info(f"Running '{command}' (seed={config.seed}, output={config.output_dir})")
    paths = COMMANDS[command](config)
    logger.info(f"'{command}' finished with {len(paths)} artifacts")
    return paths
