"""Exception hierarchy shared by every echoxkit module."""


class EchoxError(Exception):
    """Base class for all library errors."""


class InvalidInput(EchoxError, ValueError):
    pass


class InsufficientData(EchoxError, ValueError):
    pass


class DimensionMismatch(EchoxError, ValueError):
    pass


class DivisionByZero(EchoxError, ZeroDivisionError):
    pass


class SpanTooLong(EchoxError, ValueError):
    pass


class EmptyInput(EchoxError, ValueError):
    pass


class TooLargeForOracle(EchoxError, ValueError):
    pass


class InvalidTarget(EchoxError, ValueError):
    pass


class DegenerateVector(EchoxError, ValueError):
    """Raised when a cosine similarity would involve a zero-norm vector."""


class FrozenViolation(EchoxError, RuntimeError):
    """A module marked frozen had its parameters modified."""


class EmptyReference(EchoxError, ValueError):
    pass


class FormatError(EchoxError, ValueError):
    """Malformed input file."""
