"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid lattice, parameter or experiment configuration."""


class ResourceCapError(RuntimeError):
    """A requested system exceeds a hard size limit."""


class ConvergenceError(RuntimeError):
    """An iterative propagator failed to reach its tolerance."""


class InsufficientStatistics(RuntimeError):
    """Too few shots survived postselection to form an estimate."""
