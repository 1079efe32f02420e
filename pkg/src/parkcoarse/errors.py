"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataValidationError -> 3, NumericError -> 4, OSError -> 5.
"""


class ParkcoarseError(Exception):
    """Base class for all library errors."""


class ConfigError(ParkcoarseError):
    """Invalid configuration value or malformed config file."""


class DataValidationError(ParkcoarseError):
    """Input data violates the ingestion schema or a dataset invariant."""


class NumericError(ParkcoarseError):
    """Numeric failure: NaN/Inf loss, divergence, failed decomposition."""


class ShapeError(ParkcoarseError):
    """Tensor shapes incompatible with the requested operation."""
