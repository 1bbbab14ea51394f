"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 2,
data problems exit 3, and numerical failures exit 4.
"""


class STGibbsError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 1


class ConfigError(STGibbsError):
    """Invalid configuration: bad parameter values, malformed specs, bad CLI args."""

    exit_code = 2


class DataError(STGibbsError):
    """Invalid input data: malformed files, points outside the window, degenerate designs."""

    exit_code = 3


class NumericalError(STGibbsError):
    """Numerical failure: non-convergence, singular systems, unstable models."""

    exit_code = 4
