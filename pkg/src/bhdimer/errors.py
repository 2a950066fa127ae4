"""Exception types raised across the package."""


class DimerError(Exception):
    """Base class for domain errors."""


class PreconditionViolation(DimerError, ValueError):
    pass


class NoConvergence(DimerError):
    """A polynomial root failed to polish into a steady state."""

    def __init__(self, message, root=None):
        super().__init__(message)
        self.root = root


class SingularResolvent(DimerError):
    pass


class FilterOverlap(DimerError, ValueError):
    pass


class TruncationError(DimerError):
    """Fock truncation too small for the requested state."""

    def __init__(self, message, top_population=None):
        super().__init__(message)
        self.top_population = top_population


class SolveFailure(DimerError):
    pass


class FitDiverged(DimerError):
    pass


class Ambiguous(DimerError):
    """Two distinct fit minima with comparable residuals."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class UnphysicalCovariance(DimerError, ValueError):
    pass


class InsufficientSamples(DimerError, ValueError):
    pass


class MissingMoment(DimerError, KeyError):
    pass


class UnphysicalRegime(UserWarning):
    """Circuit formulas used outside their weak-coupling validity range."""
