"""Exception types shared across the package.

The CLI maps each class to an exit code: InputError -> 1,
NumericalError -> 2, ConfigError -> 3.
"""


class ClusterDemandError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ClusterDemandError):
    """Bad input data: malformed rows, duplicates, misaligned artifacts."""


class NumericalError(ClusterDemandError):
    """A numerical routine failed: non-convergence or degenerate geometry."""


class ConfigError(ClusterDemandError):
    """Invalid configuration or out-of-range parameter values."""
