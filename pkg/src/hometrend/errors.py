"""Exception hierarchy shared across the package.

``InputError`` (and subclasses) marks problems with user-supplied data or
configuration; the CLI maps it to exit code 2. Everything else that escapes
a pipeline run is treated as an internal error (exit code 3).
"""


class HometrendError(Exception):
    """Base class for all errors raised by this package."""


class InputError(HometrendError):
    """Invalid input data, arguments or configuration."""


class ConfigError(InputError):
    """Invalid run configuration."""


class TooShortError(InputError):
    """Series shorter than the minimum length a statistic requires."""


class DegenerateSeriesError(InputError):
    """Series with zero variance where a scale estimate is required."""


class PlanCoverageError(InputError):
    """Adjustment plan does not cover a date it is asked to adjust."""
