"""Exception hierarchy shared by all tbalab modules."""


class TBAError(Exception):
    """Base class for every error raised by tbalab."""


# spectral
class InvalidRank(TBAError, ValueError):
    pass


class NegativeEntry(TBAError, ValueError):
    pass


class NotIrreducible(TBAError, ValueError):
    pass


class SpectralError(TBAError, ValueError):
    """A matrix failed one of the admissibility checks."""


class ComplexSpectrum(SpectralError):
    pass


class NotDiagonalizable(SpectralError):
    pass


class SpectralRadiusTooLarge(SpectralError):
    pass


class NoConvergence(TBAError, RuntimeError):
    """An iteration hit its cap.  ``report`` carries diagnostics when available."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# kernel / model
class NearPole(TBAError, ValueError):
    pass


class BadGridParams(TBAError, ValueError):
    pass


class InvalidAsymptotics(TBAError, ValueError):
    pass


class GridTooCoarse(TBAError, ValueError):
    pass


class NotConverged(TBAError, ValueError):
    """A supplied function is not a fixed point to the required accuracy."""


# cli
class ConfigError(TBAError, ValueError):
    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class RangeError(TBAError, ValueError):
    pass


class SolveError(TBAError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
