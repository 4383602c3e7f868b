"""Exception hierarchy shared by the library and the command line."""


class QuenchedCoalescentError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(QuenchedCoalescentError, ValueError):
    """Invalid model parameters or run configuration."""


class ModelError(QuenchedCoalescentError, RuntimeError):
    """A sampler produced output that violates its contract."""


class StatisticsError(QuenchedCoalescentError, ValueError):
    """Estimator inputs are degenerate (too few replicates, all censored, ...)."""
