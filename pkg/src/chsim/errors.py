"""Exception types shared across the toolkit."""


class ChsimError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(ChsimError, ValueError):
    """A parameter is outside its admissible domain."""


class SimulationError(ChsimError):
    """A simulation produced a non-finite intermediate value."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class InsufficientDataError(ChsimError, ValueError):
    """Too few observations for the requested statistic."""


class DegenerateSeriesError(ChsimError, ValueError):
    """The series has no variation where variation is required."""


class WeightsFormatError(ChsimError, ValueError):
    """A policy weights file is malformed or dimensionally inconsistent."""


class EpisodeFinishedError(ChsimError):
    """An environment step was requested past option maturity."""


class FileFormatError(ChsimError, ValueError):
    """An interchange file could not be parsed or failed validation."""
