"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`UnstableEntropyError`; the ones signalling bad input also derive
from :class:`ValueError` so callers that only know the builtin keep working.
"""


class UnstableEntropyError(Exception):
    """Base class for package errors."""


class NotUnimodular(UnstableEntropyError, ValueError):
    pass


class NoUnstableDirection(UnstableEntropyError, ValueError):
    pass


class NoStableDirection(UnstableEntropyError, ValueError):
    pass


class UnsupportedSpectrum(UnstableEntropyError, ValueError):
    pass


class WindowTooShort(UnstableEntropyError, IndexError):
    pass


class DifferentLeaf(UnstableEntropyError, ValueError):
    pass


class DiameterExceeded(UnstableEntropyError, ValueError):
    pass


class BudgetExceeded(UnstableEntropyError, RuntimeError):
    pass


class LengthMismatch(UnstableEntropyError, ValueError):
    pass


class ThetaTooLarge(UnstableEntropyError, ValueError):
    pass


class EpsilonOutOfRange(UnstableEntropyError, ValueError):
    pass


class IncompatibleScheme(UnstableEntropyError, ValueError):
    pass


class RegionOutsideSupport(UnstableEntropyError, ValueError):
    pass


class MassDeficit(UnstableEntropyError, ValueError):
    pass


class CoverageImpossible(UnstableEntropyError, RuntimeError):
    pass


class TooManyCandidates(UnstableEntropyError, ValueError):
    pass


class ZeroMassCell(UnstableEntropyError, ValueError):
    pass


class WindowTooSmall(UnstableEntropyError, ValueError):
    pass


class ConfigError(UnstableEntropyError, ValueError):
    """Invalid experiment configuration; ``line`` points into the source file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
