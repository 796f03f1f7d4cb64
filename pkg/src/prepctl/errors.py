"""Exception types raised across the package."""


class PrepctlError(Exception):
    """Base class for every error raised by the package."""


class DegeneratePopulationError(PrepctlError):
    """Total population is zero, so the force of infection is undefined."""


class InvalidConfigurationError(PrepctlError, ValueError):
    """Parameters are invalid or incompatible with the requested system."""


class NoEndemicEquilibriumError(PrepctlError):
    """An endemic equilibrium was requested where none exists (R0 <= 1)."""


class DivergenceError(PrepctlError):
    """Integration produced a non-finite or strongly negative state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class GridMismatchError(PrepctlError, ValueError):
    """Series defined on different time grids were combined."""


class MultiplierSignError(PrepctlError):
    """A recovered constraint multiplier has the wrong sign."""


class DatasetError(PrepctlError, ValueError):
    """A calibration dataset is malformed or violates its invariants."""


class CalibrationError(PrepctlError):
    """The calibration objective could not be evaluated."""
