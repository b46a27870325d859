"""Exception hierarchy shared across the package."""


class RadSegError(Exception):
    """Base class for all package errors."""


# signal synthesis
class NoSuchCode(RadSegError, KeyError):
    pass


class ChipUnderflow(RadSegError, ValueError):
    pass


class EmptyMask(RadSegError, ValueError):
    pass


# dataset store
class IoFailure(RadSegError, OSError):
    pass


class IndexGap(RadSegError, ValueError):
    pass


class OutOfRange(RadSegError, IndexError):
    pass


class CorruptShard(RadSegError, ValueError):
    pass


class LengthMismatch(RadSegError, ValueError):
    pass


class EmptySplit(RadSegError, ValueError):
    pass


class WindowTooLong(RadSegError, ValueError):
    pass


# neural core / models
class ShapeMismatch(RadSegError, ValueError):
    pass


class OddLength(RadSegError, ValueError):
    pass


class DegenerateBatch(RadSegError, ValueError):
    pass


class InvalidConfig(RadSegError, ValueError):
    pass


class BadLength(RadSegError, ValueError):
    pass


class VersionMismatch(RadSegError, ValueError):
    pass


class CorruptCheckpoint(RadSegError, ValueError):
    pass


# train / eval
class MissingNormalizer(RadSegError, ValueError):
    pass


class BinMismatch(RadSegError, ValueError):
    pass


class NonFiniteLoss(RadSegError, FloatingPointError):
    """Raised when the training loss becomes NaN or infinite."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
