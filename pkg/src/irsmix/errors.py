"""Library-wide exception hierarchy (the CLI maps these to exit codes)."""


class IrsmixError(Exception):
    """Base for all library errors."""


class ConfigError(IrsmixError):
    """Invalid user configuration or input record."""


class NumericError(IrsmixError):
    """Numerical failure: divergence, non-convergence, or term explosion."""
