"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes (config 2, data 3, numeric 4),
so library code should raise the most specific type that applies.
"""


class GeyserStateError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(GeyserStateError):
    """A parameter, flag, or config key is missing, malformed, or out of range."""


class DataError(GeyserStateError):
    """Input data is missing, malformed, or inconsistent with its declared shape."""


class NumericError(GeyserStateError):
    """A numerical procedure failed: singular system, unstable design, degenerate input."""
