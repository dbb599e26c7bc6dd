"""Exception hierarchy.

Every domain error carries an optional ``witness`` (indices, words or values
that demonstrate the failure) so the CLI can emit it as JSON.
"""

from __future__ import annotations


class UMTError(ValueError):
    """Base class for all domain errors raised by this package."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "witness": self.witness,
        }


# metric-core
class InvalidMatrix(UMTError):
    """Matrix is not square, contains NaN/inf, or has the wrong label count."""


class AsymmetricMatrix(UMTError):
    pass


class NegativeDistance(UMTError):
    pass


class NonzeroDiagonal(UMTError):
    pass


class CoincidentPoints(UMTError):
    """Two distinct indices at distance zero."""


class TriangleViolation(UMTError):
    pass


class DuplicatePoints(UMTError):
    pass


class ZeroDenominator(UMTError):
    pass


class UnverifiedMetric(UMTError):
    """A quasi-metric (e.g. a sphericalization) was passed where a metric is required."""


# cantor
class DepthMismatch(UMTError):
    pass


class InvalidWord(UMTError):
    pass


class BasePointArgument(UMTError):
    pass


class BaseIncluded(UMTError):
    pass


class SizeLimitExceeded(UMTError):
    pass


# deform / props / ultrametrize
class TooFewPoints(UMTError):
    pass


class ExactSearchTooLarge(UMTError):
    pass


class NotUltrametric(UMTError):
    pass


# distort / embed
class InvalidMap(UMTError):
    pass


class ScanTooLarge(UMTError):
    pass


class AlphabetTooSmall(UMTError):
    def __init__(self, message: str, minimal_k: int, witness=None):
        super().__init__(message, witness)
        self.minimal_k = minimal_k

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["minimal_k"] = self.minimal_k
        return out


class DegenerateInput(UMTError):
    pass


class InvalidParams(UMTError):
    pass
