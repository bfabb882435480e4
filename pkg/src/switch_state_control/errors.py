"""
Exception hierarchy for switch-state control.

Configuration and parameter problems map to CLI exit code 2, numeric failures
(instability, divergence, singularity, non-convergence) map to exit code 3.
"""

from typing import Optional


class SwitchControlError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SwitchControlError):
    """A configuration document violates the strict schema."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParameterError(SwitchControlError):
    """A numeric parameter is outside its admissible range."""


class DimensionError(ParameterError):
    """Matrix or vector shapes do not agree."""


class MetricsError(SwitchControlError):
    """Metrics cannot be derived from the given trace."""


class NumericalError(SwitchControlError):
    """Base class for numeric failures."""


class StabilityError(NumericalError):
    """The plant violates the stable-plant assumption."""


class NonConvergenceError(NumericalError):
    """An iterative solve did not converge."""


class SingularMatrixError(NumericalError):
    """A linear solve hit a singular or near-singular matrix."""


class DivergenceError(NumericalError):
    """The closed-loop state left the admissible envelope."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")
