"""Exception hierarchy shared by every module.

All errors derive from :class:`QMoneyError`, itself a ``ValueError`` so that
callers that only care about "bad input" can catch the builtin.
"""

from __future__ import annotations


class QMoneyError(ValueError):
    """Base class for all package errors."""


class InvalidInput(QMoneyError):
    pass


class NotBijective(QMoneyError):
    pass


class InvalidProjector(QMoneyError):
    pass


class ZeroBranch(QMoneyError):
    """A projection or measurement branch has zero probability."""


class InvariantBroken(QMoneyError):
    """A permutation changes the invariant; ``witness`` holds ``(i, x)``."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class InvalidPath(QMoneyError):
    pass


class InvalidParams(QMoneyError):
    pass


class NotAnEncodedPoint(QMoneyError):
    pass


class SingularBasis(QMoneyError):
    pass


class WidthTooNarrow(QMoneyError):
    pass


class DegenerateShortSet(QMoneyError):
    pass


class EmptyCoset(QMoneyError):
    pass


class NotGoodEllipsoid(QMoneyError):
    pass


class MixedCoset(QMoneyError):
    pass


class InvalidMixture(QMoneyError):
    pass


class RankDeficient(QMoneyError):
    pass


class EmptyAudit(QMoneyError):
    pass


class ConfigError(QMoneyError):
    """Invalid CLI configuration (mapped to exit code 2)."""


class InternalError(QMoneyError):
    """An internal consistency check failed (e.g. non-integral coordinates)."""


class DimensionMismatch(QMoneyError):
    pass
