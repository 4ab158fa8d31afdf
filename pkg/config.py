from pathlib import Path

# Project path resolution
PROJECT_ROOT = Path(__file__).resolve().parent

# Application Metadata
APP_NAME = "SDS Predictability Toolkit"
APP_VERSION = "1.0"
EXECUTABLE_NAME = "sdspredict"

# Logging settings
LOGGER_NAME = "sdspredict"
LOG_SUBDIR = ".sdspredict"
LOG_FILENAME = "sdspredict.log"
LOG_MAX_BYTES = 5 * 1024 * 1024 # 5 MB
LOG_BACKUP_COUNT = 3

# Experiment defaults
DEFAULT_EPS = 0.1
DEFAULT_HORIZON = 400
DEFAULT_N_TRAJ = 200
FIGURE_N_TRAJ = 3
DEFAULT_SEED = 20240501
DEFAULT_WORKERS = 1
DEFAULT_OUTPUT_DIR = "results"

# Monte-Carlo budgets
DEFAULT_MC_BUDGET = 10_000
DEFAULT_ENTROPY_SAMPLES = 100_000
MC_CHUNK_SIZE = 50_000
MIN_ENTROPY_SAMPLES = 100

# Simulation guards
DIVERGENCE_THRESHOLD = 1e12
DEFAULT_RANDOM_SPECTRAL_RADIUS = 0.9

# Partition settings
GAUSSIAN_BOUNDS_SIGMAS = 6.0
WEIGHT_SUM_TOL = 1e-10
GRID_WEIGHT_SUM_TOL = 1e-12

# Mismatch sweeps (tau regulates the error mean, eta its variance)
MISMATCH_GRID = (0.0, 0.5, 1.0, 1.5)

# 95% two-sided normal quantile
CI_Z = 1.959963984540054

# Designer settings
DEFAULT_CAP_SIGMAS = 3.0
DEFAULT_DESIGN_GRID = 10_000
MIN_DESIGN_GRID = 100
DEFAULT_DESIGN_TOL = 1e-6
DEFAULT_DESIGN_MAX_ITER = 200
DEFAULT_ONE_STEP_RADIUS = 0.1
ONE_STEP_RESOLUTION_DIVISOR = 50
CANDIDATE_GRID = 4_000

# Output file names
TRAJECTORIES_CSV = "trajectories.csv"
RATES_CSV = "rates.csv"
SUMMARY_CSV = "summary.csv"
RUNNING_RATE_CSV = "running_rate.csv"
DESIGN_WEIGHTS_CSV = "design_weights.csv"
DESIGN_NOISE_INI = "design_noise.ini"
EQUIVALENCE_CSV = "equivalence.csv"
DESIGN_DIST_CSV = "design_dist.csv"
NOISE_DIST_CSV = "noise_dist.csv"
FIG1_RATE_CSV = "fig1_running_rate.csv"
FIG1_STATES_CSV = "fig1_states.csv"
FIG2_TAU_CSV = "fig2_tau.csv"
FIG2_ETA_CSV = "fig2_eta.csv"
FIG2_SUMMARY_CSV = "fig2_summary.csv"

# Plot settings
PLOT_FORMAT = "svg"
PLOT_FIGSIZE = (7.0, 4.5)
PLOT_REFERENCE_STYLE = {'color': 'red', 'linestyle': ':', 'linewidth': 1.5}
PLOT_COLORMAP = 'viridis'
