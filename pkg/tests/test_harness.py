"""Tests for the harness: text blocks, config loading, CSV export and the CLI."""
import csv
import logging
import math

import numpy as np
import pytest

from config import PROJECT_ROOT
from core.errors import ConfigurationError, ModelDomainError
from core.noise_models import GaussianNoise, GridDensityNoise, UniformBoxNoise
from core.partition import DiscreteDist, GridPartition
from core.sds_sim import SystemModel, random_mean, simulate
from harness.blocks import (
    noise_from_block,
    noise_to_block,
    parse_matrix,
    parse_vector,
    partition_from_block,
    partition_to_block,
    predictor_from_block,
    predictor_to_block,
    system_from_block,
)
from harness.experiment_config import load_config, read_parser
from harness.export import write_csv, write_distribution, write_series, write_trajectories
from logger import log_run_header, logger, run_header, setup_logging
from main import main

GAUSSIAN_2D = """
[experiment]
eps = 0.1
K = {K}
n_traj = {n_traj}
seed = 7
output_dir = {out}
taus = 0.0, 1.0
etas = 0.0, 1.0

[system]
F = 0.5, 0.1, 0.0, 0.8

[noise]
kind = gaussian
dim = 2
mean = 0
cov = 1

[predictor]
predictor = optimal
"""

DESIGN = """
[experiment]
output_dir = {out}

[design]
sigma = 1.0
cap = 3.0
grid_resolution = 2000
r = 0.1
"""


@pytest.fixture(autouse=True)
def reset_logger():
    yield
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


@pytest.fixture
def gaussian_config(tmp_path):
    def make(K=20, n_traj=4, name="experiment.ini"):
        path = tmp_path / name
        path.write_text(GAUSSIAN_2D.format(K=K, n_traj=n_traj, out=tmp_path / "out"), encoding='utf-8')
        return path
    return make


def _read_rows(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.reader(handle))


# --- Blocks ---

class TestBlocks:
    def test_parse_vector(self):
        np.testing.assert_array_equal(parse_vector("1, 2.5; -3"), [1.0, 2.5, -3.0])
        with pytest.raises(ConfigurationError):
            parse_vector("a, b")
        with pytest.raises(ConfigurationError):
            parse_vector(" ")

    def test_parse_matrix(self):
        np.testing.assert_array_equal(parse_matrix("2", 2), 2.0 * np.eye(2))
        np.testing.assert_array_equal(parse_matrix("1, 2, 3, 4", 2), [[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ConfigurationError):
            parse_matrix("1, 2, 3", 2)

    def test_gaussian_block(self):
        noise = noise_from_block({'kind': 'gaussian', 'dim': '2', 'mean': 'random(3)', 'cov': '0.5'})
        np.testing.assert_array_equal(noise.mean, random_mean(2, 3))
        np.testing.assert_array_equal(noise.covariance, 0.5 * np.eye(2))

    def test_gaussian_block_dimension_from_mean(self):
        noise = noise_from_block({'kind': 'gaussian', 'mean': '1, 2, 3'})
        assert noise.dim == 3
        with pytest.raises(ConfigurationError):
            noise_from_block({'kind': 'gaussian'})

    def test_uniform_block(self):
        noise = noise_from_block({'kind': 'uniform_box', 'half_widths': '1, 2'})
        assert isinstance(noise, UniformBoxNoise)
        np.testing.assert_array_equal(noise.center, [0.0, 0.0])
        with pytest.raises(ConfigurationError):
            noise_from_block({'kind': 'uniform_box'})

    def test_grid_density_block(self):
        block = {'kind': 'grid_density', 'lower': '0', 'upper': '3', 'cell_width': '1', 'weights': '0.2, 0.5, 0.3'}
        noise = noise_from_block(block)
        assert isinstance(noise, GridDensityNoise)
        with pytest.raises(ConfigurationError):
            noise_from_block({'kind': 'grid_density', 'lower': '0'})

    def test_invalid_weights_surface_domain_error(self):
        block = {'kind': 'grid_density', 'lower': '0', 'upper': '3', 'cell_width': '1', 'weights': '0.2, 0.5, 0.2'}
        with pytest.raises(ModelDomainError):
            noise_from_block(block)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            noise_from_block({'kind': 'laplace'})

    @pytest.mark.parametrize("noise", [
        GaussianNoise([0.1, -0.2], [[1.0, 0.3], [0.3, 0.5]]),
        UniformBoxNoise([0.0], [1.7320508075688772]),
        GridDensityNoise(GridPartition([0.0], [1.0], 0.25), [0.1, 0.2, 0.3, 0.4]),
    ])
    def test_noise_block_is_exact(self, noise):
        again = noise_from_block(noise_to_block(noise))
        assert type(again) is type(noise)
        np.testing.assert_array_equal(again.mean, noise.mean)
        np.testing.assert_array_equal(again.covariance, noise.covariance)

    def test_system_block(self):
        noise = GaussianNoise([0.0, 0.0], np.eye(2))
        system = system_from_block({'F': 'random(5, 0.5)'}, noise)
        assert float(np.max(np.abs(np.linalg.eigvals(system.F)))) == pytest.approx(0.5)
        system = system_from_block({'F': '1, 0, 0, 1', 'B': '1, 2'}, noise)
        assert system.B.shape == (2, 1)
        with pytest.raises(ConfigurationError):
            system_from_block({'dim': '3'}, noise)
        with pytest.raises(ConfigurationError):
            system_from_block({'F': '1, 0, 0, 1', 'B': '1, 2, 3'}, noise)

    def test_partition_block(self):
        noise = GaussianNoise([0.0], [[1.0]])
        explicit = partition_from_block({'lower': '-1', 'upper': '1', 'cell_width': '0.5'}, noise)
        assert explicit.shape == (4,)
        around = partition_from_block({'cell_width': '0.5', 'bounds_sigmas': '2'}, noise)
        np.testing.assert_allclose(around.upper, [2.0])
        assert partition_from_block(partition_to_block(explicit), noise).same_as(explicit)
        with pytest.raises(ConfigurationError):
            partition_from_block({'lower': '-1', 'upper': '1'}, noise)
        with pytest.raises(ConfigurationError):
            partition_from_block({'lower': '-1', 'cell_width': '0.5'}, noise)

    @pytest.mark.parametrize("text, name", [
        ("optimal", "optimal"),
        ("mean", "mean"),
        ("mismatch(0.5, 1)", "mismatch(0.5, 1.0)"),
        ("deterministic(0.1, 0.2)", "deterministic"),
    ])
    def test_predictor_descriptors(self, text, name):
        system = system_from_block({}, GaussianNoise([0.0, 0.0], np.eye(2)))
        predictor = predictor_from_block(text, system)
        assert predictor.name == name
        assert predictor_from_block(predictor_to_block(predictor), system).name == name

    @pytest.mark.parametrize("text", ["kalman", "mismatch(1)", "optimal(1)", "deterministic", "(1, 2)"])
    def test_bad_predictor_descriptors(self, text):
        system = system_from_block({}, GaussianNoise([0.0, 0.0], np.eye(2)))
        with pytest.raises(ConfigurationError):
            predictor_from_block(text, system)


# --- Config ---

class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.system.dim == 2
        assert config.predictor.name == "optimal"
        assert config.eps == 0.1
        assert config.K == 400
        assert config.partition is None
        assert not config.system.noise.is_product_form

    def test_file_and_overrides(self, gaussian_config, tmp_path):
        config = load_config(gaussian_config(), {'seed': 99, 'workers': None, 'output_dir': str(tmp_path / 'x')})
        assert config.seed == 99
        assert config.workers == 1
        assert config.K == 20
        assert config.output_dir == tmp_path / 'x'
        assert config.taus == (0.0, 1.0)
        np.testing.assert_array_equal(config.system.F, [[0.5, 0.1], [0.0, 0.8]])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "missing.ini")

    def test_section_defaults_are_whole(self, tmp_path):
        path = tmp_path / "one_d.ini"
        path.write_text("[noise]\nkind = uniform_box\nhalf_widths = 1.5\n\n[system]\nF = 0.5\n", encoding='utf-8')
        config = load_config(path)
        assert config.system.dim == 1
        parser = read_parser(path)
        assert 'dim' not in parser['noise']

    @pytest.mark.parametrize("line", ["eps = 0", "K = 0", "n_traj = -1", "seed = -3", "budget = 0", "K = ten"])
    def test_invalid_experiment_values(self, tmp_path, line):
        path = tmp_path / "bad.ini"
        path.write_text(f"[experiment]\n{line}\n", encoding='utf-8')
        with pytest.raises(ConfigurationError):
            load_config(path)

    @pytest.mark.parametrize("name", ["fig1_2d.ini", "identity_2d.ini", "uniform_1d.ini", "design.ini"])
    def test_shipped_configs_load(self, name):
        config = load_config(PROJECT_ROOT / "configs" / name)
        assert config.eps == 0.1

    def test_design_section(self, tmp_path):
        path = tmp_path / "design.ini"
        path.write_text(DESIGN.format(out=tmp_path), encoding='utf-8')
        problem = load_config(path).design.problem()
        assert problem.cap == 3.0
        assert problem.grid_resolution == 2000


# --- Export ---

class TestExport:
    def test_floats_round_trip(self, tmp_path):
        value = 0.1 + 0.2
        path = write_csv(tmp_path / "a.csv", ['x', 'flag', 'empty'], [(value, True, None)])
        rows = _read_rows(path)
        assert rows[1] == [repr(value), 'true', '']
        assert float(rows[1][0]) == value

    def test_series_is_one_based(self, tmp_path):
        path = write_series(tmp_path / "s.csv", {'a': np.array([1.0, 2.0]), 'b': np.array([3.0, 4.0])})
        assert _read_rows(path) == [['k', 'a', 'b'], ['1', '1.0', '3.0'], ['2', '2.0', '4.0']]

    def test_distribution_rows(self, tmp_path):
        dist = DiscreteDist(GridPartition([0.0], [1.0], 0.5), [0.25, 0.5, 0.25])
        path = write_distribution(tmp_path / "d.csv", dist)
        assert _read_rows(path) == [['cell_index', 'weight'], ['0', '0.25'], ['1', '0.5'], ['2', '0.25']]

    def test_trajectory_header(self, tmp_path):
        system = SystemModel.linear([[0.5]], UniformBoxNoise([0.0], [1.0]))
        trajectory = simulate(system, [0.0], 3, seed=1)
        rows = _read_rows(write_trajectories(tmp_path / "t.csv", [trajectory]))
        assert rows[0] == ['trajectory', 'k', 'x_1', 'w_1']
        assert [row[1] for row in rows[1:]] == ['0', '1', '2', '3']
        assert rows[-1][3] == ''


# --- Logging ---

class TestLogging:
    def test_run_header_fields(self):
        header = run_header('evaluate', seed=7, out=None)
        assert header.startswith("app='SDS Predictability Toolkit' version=1.0 command=evaluate ")
        assert "seed=7" in header
        assert "out=" not in header
        assert "numpy=" in header and "scipy=" in header

    def test_cli_logs_run_header(self, gaussian_config, capsys):
        assert main(['exponent', '--config', str(gaussian_config()), '--no-log-file', '--seed', '3']) == 0
        err = capsys.readouterr().err
        assert "[exponent] Run started: app=" in err
        assert "seed=3" in err

    def test_context_follows_command(self, gaussian_config, capsys):
        config = str(gaussian_config())
        setup_logging(logging.INFO, log_to_file=False, command='simulate')
        assert main(['exponent', '--config', config, '--no-log-file']) == 0
        assert "[exponent]" in capsys.readouterr().err

    def test_caplog_sees_records(self, caplog):
        with caplog.at_level(logging.INFO, logger="sdspredict"):
            log_run_header('design')
        assert "command=design" in caplog.text


# --- CLI ---

class TestCli:
    def test_exponent(self, gaussian_config, capsys):
        assert main(['exponent', '--config', str(gaussian_config()), '--no-log-file']) == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(-6.05676, abs=1e-5)

    def test_simulate(self, gaussian_config, tmp_path):
        assert main(['simulate', '--config', str(gaussian_config(K=10, n_traj=3)), '--no-log-file']) == 0
        rows = _read_rows(tmp_path / "out" / "trajectories.csv")
        assert rows[0] == ['trajectory', 'k', 'x_1', 'x_2', 'w_1', 'w_2']
        assert len(rows) == 1 + 3 * 11
        assert rows[11][4:] == ['', '']

    def test_evaluate_is_reproducible(self, gaussian_config, tmp_path, capsys):
        config = str(gaussian_config())
        assert main(['evaluate', '--config', config, '--no-log-file', '--out', str(tmp_path / 'a')]) == 0
        assert main(['evaluate', '--config', config, '--no-log-file', '--out', str(tmp_path / 'b')]) == 0
        assert main(['evaluate', '--config', config, '--no-log-file', '--out', str(tmp_path / 'c'),
                     '--workers', '2']) == 0
        first = (tmp_path / 'a' / 'rates.csv').read_bytes()
        assert first == (tmp_path / 'b' / 'rates.csv').read_bytes()
        assert first == (tmp_path / 'c' / 'rates.csv').read_bytes()
        assert len(_read_rows(tmp_path / 'a' / 'rates.csv')) == 5
        summary = dict(_read_rows(tmp_path / 'a' / 'summary.csv')[1:])
        assert summary['predictor'] == 'optimal'
        assert 'mean_rate' in capsys.readouterr().out

    def test_evaluate_writes_noise_distribution(self, gaussian_config, tmp_path):
        path = gaussian_config()
        path.write_text(path.read_text(encoding='utf-8') + "\n[partition]\ncell_width = 0.5\nbounds_sigmas = 2\n",
                        encoding='utf-8')
        assert main(['evaluate', '--config', str(path), '--no-log-file']) == 0
        rows = _read_rows(tmp_path / "out" / "noise_dist.csv")
        assert rows[0] == ['cell_index', 'weight']
        assert len(rows) == 1 + 8 * 8 + 1
        assert [int(row[0]) for row in rows[1:]] == list(range(65))
        assert math.isclose(sum(float(row[1]) for row in rows[1:]), 1.0, abs_tol=1e-12)
        # mass outside [-2, 2)^2
        assert float(rows[-1][1]) == pytest.approx(1.0 - (2.0 * 0.9772498680518208 - 1.0) ** 2, abs=1e-9)

    def test_evaluate_without_partition_skips_distribution(self, gaussian_config, tmp_path):
        assert main(['evaluate', '--config', str(gaussian_config()), '--no-log-file']) == 0
        assert not (tmp_path / "out" / "noise_dist.csv").exists()

    def test_seed_override_changes_rates(self, gaussian_config, tmp_path):
        config = str(gaussian_config())
        main(['evaluate', '--config', config, '--no-log-file', '--out', str(tmp_path / 'a')])
        main(['evaluate', '--config', config, '--no-log-file', '--out', str(tmp_path / 'b'), '--seed', '8'])
        assert (tmp_path / 'a' / 'rates.csv').read_bytes() != (tmp_path / 'b' / 'rates.csv').read_bytes()

    def test_fig1(self, gaussian_config, tmp_path):
        assert main(['fig1', '--config', str(gaussian_config(K=400)), '--no-log-file']) == 0
        out = tmp_path / "out"
        rows = _read_rows(out / "fig1_running_rate.csv")
        assert rows[0] == ['k', 'trajectory_0', 'trajectory_1', 'trajectory_2', 'reference']
        assert len(rows) == 401
        final = [float(v) for v in rows[-1][1:]]
        reference = final[-1]
        assert reference == pytest.approx(-6.05676, abs=1e-5)
        # unit covariance in 2-D: one step score has standard deviation ~1,
        # so a running rate after k steps deviates by about 1 / sqrt(k)
        for value in final[:-1]:
            assert abs(value - reference) < 4.0 / math.sqrt(400)
        assert abs(np.mean(final[:-1]) - reference) < 4.0 / math.sqrt(3 * 400)
        for row in rows[100:]:
            k = int(row[0])
            assert all(abs(float(v) - reference) < 4.0 / math.sqrt(k) for v in row[1:4])
        assert (out / "fig1_running_rate.svg").is_file()
        assert (out / "fig1_states.svg").is_file()

    def test_fig2(self, gaussian_config, tmp_path):
        assert main(['fig2', '--config', str(gaussian_config(K=50, n_traj=5)), '--no-log-file']) == 0
        out = tmp_path / "out"
        rows = _read_rows(out / "fig2_summary.csv")
        assert rows[0] == ['predictor', 'tau', 'eta', 'mean_rate', 'ci', 'n_degenerate']
        by_name = {row[0]: row for row in rows[1:]}
        assert len(rows) == 1 + 4 + 1
        assert float(by_name['mismatch(1.0, 0.0)'][3]) < float(by_name['mismatch(0.0, 0.0)'][3])
        assert by_name['mean'][3] == '-inf'
        assert _read_rows(out / "fig2_tau.csv")[0] == ['k', 'tau=0.0', 'tau=1.0']
        assert (out / "fig2_eta.svg").is_file()

    def test_design(self, tmp_path, capsys):
        path = tmp_path / "design.ini"
        path.write_text(DESIGN.format(out=tmp_path / "out"), encoding='utf-8')
        assert main(['design', '--config', str(path), '--no-log-file']) == 0
        out = tmp_path / "out"
        text = capsys.readouterr().out
        assert "leader by one-step value: uniform" in text
        weights = _read_rows(out / "design_weights.csv")
        assert len(weights) == 2001
        assert math.isclose(sum(float(row[2]) for row in weights[1:]), 1.0, abs_tol=1e-9)
        parser = read_parser(out / "design_noise.ini")
        noise = noise_from_block(dict(parser['noise']))
        assert noise.covariance[0, 0] == pytest.approx(1.0, abs=1e-4)
        ranks = {row[0]: row for row in _read_rows(out / "equivalence.csv")[1:]}
        assert set(ranks) == {"uniform", "truncated_gaussian", "triangular", "numeric"}
        dist_rows = _read_rows(out / "design_dist.csv")
        assert dist_rows[0] == ['cell_index', 'weight']
        assert len(dist_rows) == 1 + 2000 + 1
        assert float(dist_rows[-1][1]) == 0.0
        assert (out / "design_weights.svg").is_file()

    def test_configuration_error_exit_code(self, tmp_path, capsys):
        assert main(['evaluate', '--config', str(tmp_path / "missing.ini"), '--no-log-file']) == 2
        assert "ConfigurationError" in capsys.readouterr().err

    def test_domain_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[noise]\nkind = uniform_box\nhalf_widths = 1\n\n[system]\nF = 0.5\n\n"
                        "[predictor]\npredictor = mismatch(0.5, 0)\n", encoding='utf-8')
        assert main(['evaluate', '--config', str(path), '--no-log-file']) == 2
        assert "ModelDomainError" in capsys.readouterr().err

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(['plot'])

    def test_log_level(self, gaussian_config):
        assert main(['exponent', '--config', str(gaussian_config()), '--no-log-file', '--log-level', 'DEBUG']) == 0
        assert logger.level == logging.DEBUG
