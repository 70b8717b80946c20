"""Exception types shared across the package."""


class PspinError(Exception):
    """Base class for all package errors."""


class ParameterError(PspinError, ValueError):
    """Invalid model or operation parameter (p < 3, N < 2, bad dt, ...)."""


class DimensionMismatchError(PspinError, ValueError):
    """Vector or tensor dimensions do not agree."""


class RegionError(PspinError, ValueError):
    """Region is empty / has zero volume where positive volume is required."""


class IntegrationError(PspinError, RuntimeError):
    """Non-finite state encountered while integrating a chain.

    Carries the global step index at which the blow-up was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConductanceConditionError(PspinError, ValueError):
    """The conductance bound's denominator condition pi(A)pi(A_eps^c) > 4 pi(shell) failed."""


class FlatLandscapeError(PspinError, ValueError):
    """Every point is critical (zero coupling tensor); no minima catalog exists."""


class ConvergenceError(PspinError, RuntimeError):
    """An iterative solver hit its iteration cap without converging."""


class AnalysisError(PspinError, ValueError):
    """A statistical estimate is undefined for the given input (e.g. constant series)."""


class ConfigError(PspinError, ValueError):
    """Invalid experiment configuration."""
