"""Exception hierarchy shared by every swapqnn module."""

from __future__ import annotations


class SwapQNNError(Exception):
    """Base class for all library errors."""


class ValidationError(SwapQNNError, ValueError):
    """Raised when an input violates a documented precondition."""


class ZeroNorm(ValidationError):
    pass


class ZeroNormPiece(ZeroNorm):
    """A partitioned input or weight piece has (numerically) zero norm."""

    def __init__(self, index, message: str | None = None):
        self.index = index
        super().__init__(message or f"piece {index} has zero norm")


class DimensionMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class DuplicateIndex(ValidationError):
    pass


class EmptyKeepSet(ValidationError):
    pass


class InvalidDensityMatrix(ValidationError):
    pass


class InvalidEpsilon(ValidationError):
    pass


class InvalidProbability(ValidationError):
    pass


class InvalidEfficiency(ValidationError):
    pass


class ConfigError(ValidationError):
    """A configuration file or dataset could not be parsed or is inconsistent."""


class RegisterTooLarge(SwapQNNError):
    """The requested dense simulation exceeds the configured qubit budget."""


class DivergenceDetected(SwapQNNError, ArithmeticError):
    """Training produced a non-finite loss."""
