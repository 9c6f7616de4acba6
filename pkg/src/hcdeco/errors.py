"""Exception hierarchy shared by the engines and the CLI."""


class DecoherenceError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DecoherenceError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid input")


class DeltaUnsupported(DecoherenceError):
    """A point-mass environment was handed to a routine that needs a density."""


class GridTooNarrow(DecoherenceError):
    pass


class TailError(DecoherenceError):
    """Gridded density does not decay at the ends of its grid."""


class PositionNotInSupport(DecoherenceError):
    pass


class NonFiniteVariance(DecoherenceError):
    pass


class ZeroWidth(DecoherenceError):
    """Centre-of-mass spread is exactly zero, so no decoherence time exists."""


class ZeroSeparation(DecoherenceError):
    pass


class InsufficientSamples(DecoherenceError):
    pass


class GridError(DecoherenceError):
    pass


class CourantViolation(DecoherenceError):
    """Evolved amplitude reached the edge of the periodic grid."""


class NormDrift(DecoherenceError):
    pass
