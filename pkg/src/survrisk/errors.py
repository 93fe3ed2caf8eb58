"""Exception hierarchy shared across the package.

The CLI maps ConfigError to exit code 2, DataError to exit code 3, and
anything else to exit code 1.
"""


class SurvriskError(Exception):
    pass


class ConfigError(SurvriskError):
    """Invalid configuration: bad spec values, missing keys, arity mismatches."""


class DataError(SurvriskError):
    """Invalid or missing data at runtime."""


class BundleFormatError(DataError):
    """Missing file, malformed header, or empty result in a CSV bundle."""


class ModelFileError(DataError):
    """Corrupt, truncated, or version-incompatible model file."""


class BalanceError(DataError):
    """Class balancing cannot be satisfied (one class empty)."""
