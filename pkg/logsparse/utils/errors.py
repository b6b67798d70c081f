__all__ = [
    "LoggingException",
    "InvalidParams",
    "ParseError",
    "DimensionMismatch",
    "SingularSystem",
    "Infeasible",
    "EmptySupport",
    "ZeroColumn",
    "TooLarge",
    "TrivialNullSpace",
    "OutOfRange",
    "NonRealRoots",
    "LengthMismatch",
    "CountMismatch",
    "NoSuspects",
]


class LoggingException(Exception):
    """Custom exception returned from log.crit and log.error"""


class InvalidParams(LoggingException, ValueError):
    """A parameter record or argument violates its documented range."""


class ParseError(LoggingException):
    """An input file could not be parsed. The message carries the offending line."""


class DimensionMismatch(LoggingException, ValueError):
    """Matrix and vector shapes do not agree."""


class SingularSystem(LoggingException):
    """The (regularized) Gram matrix is numerically singular."""


class Infeasible(LoggingException):
    """No vector satisfying the constraints was found."""


class EmptySupport(LoggingException):
    """The thresholded support is empty while the residual still exceeds epsilon."""


class ZeroColumn(LoggingException):
    """A matrix column is identically zero."""


class TooLarge(LoggingException):
    """A brute-force enumeration would exceed its guard."""


class TrivialNullSpace(LoggingException):
    """The matrix has full column rank."""


class OutOfRange(LoggingException, ValueError):
    """A scalar argument lies outside its admissible interval."""


class NonRealRoots(LoggingException):
    """The power sums do not belong to a real multiset."""


class LengthMismatch(LoggingException, ValueError):
    """Two sequences were expected to have equal length."""


class CountMismatch(LoggingException, ValueError):
    """Two point sets were expected to have equal size."""


class NoSuspects(LoggingException):
    """The score is above delta but no entry qualifies for refinement."""
