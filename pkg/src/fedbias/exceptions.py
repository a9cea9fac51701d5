"""Error types shared across the package.

The CLI maps these onto exit statuses: configuration problems exit 1,
data/parse problems exit 2, everything else that is raised at runtime
(protocol violations, undefined metrics, numeric failures) exits 3.
"""


class ConfigurationError(ValueError):
    """A config value, mode combination, or experiment setup is invalid."""


class DataFormatError(ValueError):
    """A data file could not be parsed. Messages name the offending line."""


class ProtocolError(ValueError):
    """Client/server exchange violated the federation contract."""


class UndefinedMetricError(ValueError):
    """A metric has no defined value for the given prediction log."""


class NumericError(ArithmeticError):
    """A computation received or produced non-finite values."""
