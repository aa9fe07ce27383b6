"""Exception types shared across the package."""


class WaveadError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(WaveadError):
    """Invalid or inconsistent run configuration."""


class DataError(WaveadError):
    """Malformed or unusable input data."""


class DivergenceError(WaveadError):
    """Training produced non-finite values."""
