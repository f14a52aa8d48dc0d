"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numeric failures with 3 (see cli.py).
"""


class JamnullError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(JamnullError):
    """Invalid configuration value, unknown key, or inconsistent setup."""


class ShapeError(JamnullError):
    """Operand has the wrong shape or is not Hermitian where required."""


class NumericError(JamnullError):
    """Numeric failure: non-finite input, singular operand, and the like."""


class NumericInputError(NumericError):
    """Input contains NaN or Inf entries."""


class NotPSDError(NumericError):
    """Matrix expected to be positive semidefinite has a negative eigenvalue."""


class IllConditionedError(NumericError):
    """Matrix condition number exceeds the usable threshold."""


class ScheduleError(ConfigError):
    """Correlation schedule produced an invalid covariance."""


class CheckpointError(JamnullError):
    """Checkpoint file is missing, corrupt, or from an incompatible config."""
