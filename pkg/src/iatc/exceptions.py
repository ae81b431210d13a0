"""Exception hierarchy shared across the toolkit."""


class IatcError(Exception):
    """Base class for toolkit errors."""


class DatasetError(IatcError):
    """Dataset directory or response-data validation failure."""


class FitError(IatcError):
    """A mapping or GLM fit could not be computed."""


class ConvergenceError(FitError):
    """An iterative solver hit its iteration limit without reaching tolerance."""

    def __init__(self, message, trace=None, gap=None):
        super().__init__(message)
        self.trace = trace
        self.gap = gap


class SimulationError(IatcError):
    """Synthetic data generation failed validation."""


class ConfigError(IatcError):
    """Invalid experiment configuration."""
