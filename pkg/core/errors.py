"""Exception hierarchy shared by the core modules and the harness."""
from typing import Optional, Sequence


class SDSPredictError(Exception):
    """Base class for every error raised deliberately by this package."""


class ContractViolationError(SDSPredictError, ValueError):
    """Dimension, length or partition mismatch between arguments."""


class ConfigurationError(SDSPredictError, ValueError):
    """Invalid configuration value or unusable parameter combination."""


class UnsupportedMethodError(ConfigurationError):
    """A computation method was requested for a model that cannot support it."""


class ModelDomainError(SDSPredictError, ValueError):
    """Model parameters outside their mathematical domain."""


class SupportMismatchError(SDSPredictError, RuntimeError):
    """A drawn sample landed where the model density is zero."""


class SimulationDivergedError(SDSPredictError, RuntimeError):
    """Trajectory state became non-finite or exceeded the divergence guard."""

    def __init__(self, step: int, message: Optional[str] = None):
        self.step = step
        super().__init__(message or f"simulation diverged at step {step}")


class DesignInfeasibleError(ModelDomainError):
    """Design constraints admit no solution under the support cap."""


class DesignConvergenceError(SDSPredictError, RuntimeError):
    """Moment matching did not reach the requested tolerance."""

    def __init__(self, residuals: Sequence[float], message: Optional[str] = None):
        self.residuals = tuple(float(r) for r in residuals)
        super().__init__(message or f"design did not converge, last residuals {self.residuals}")
