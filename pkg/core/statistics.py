import numpy as np
from scipy.special import logsumexp

from config import CI_Z

def compute_mean_ci(values: np.ndarray, z: float = CI_Z) -> tuple:
    """Calculate the sample mean and the normal-approximation CI half-width."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return float('nan'), float('nan')
    mean = float(np.sum(values) / len(values))
    if len(values) < 2:
        return mean, 0.0
    std = float(np.std(values, ddof=1))
    return mean, float(z * std / np.sqrt(len(values)))

def compute_standard_error(values: np.ndarray) -> float:
    """Calculate the standard error of the sample mean."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))

def compute_sample_covariance(points: np.ndarray) -> np.ndarray:
    """Calculate the unbiased sample covariance of (N, d) points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 2:
        return np.zeros((points.shape[1], points.shape[1]))
    return np.atleast_2d(np.cov(points, rowvar=False))

def relative_frobenius_error(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Frobenius distance between two matrices relative to the reference norm."""
    reference = np.atleast_2d(reference)
    return float(np.linalg.norm(np.atleast_2d(estimate) - reference) / np.linalg.norm(reference))

def log_mean_exp(log_values: np.ndarray) -> float:
    """Calculate ln(mean(exp(v))) without underflow."""
    log_values = np.asarray(log_values, dtype=float)
    if len(log_values) == 0:
        return float('nan')
    return float(logsumexp(log_values) - np.log(len(log_values)))

def running_mean(values: np.ndarray) -> np.ndarray:
    """Cumulative mean: entry k is the mean of values[:k + 1]."""
    values = np.asarray(values, dtype=float)
    return np.cumsum(values) / np.arange(1, len(values) + 1)
