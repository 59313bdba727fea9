"""Exception hierarchy shared by every stage of the pipeline."""


class ForcefieldError(Exception):
    """Base class for all errors raised by this package."""


class OutOfRegion(ForcefieldError, ValueError):
    """A point lies too far from the projection origin for the local plane."""


class FormatError(ForcefieldError, ValueError):
    """Malformed log file, header or record."""


class EmptyLog(ForcefieldError, ValueError):
    """A log carries no pose samples."""


class NmeaError(FormatError):
    pass


class InvalidChar(NmeaError):
    pass


class ChecksumMismatch(NmeaError):
    pass


class UnsupportedSentence(NmeaError):
    pass


class MissingDepthField(NmeaError):
    pass


class NonPositiveDepth(NmeaError):
    pass


class InvalidSlop(ForcefieldError, ValueError):
    pass


class NotPositiveDefinite(ForcefieldError, ArithmeticError):
    """Cholesky factorisation failed even after the full jitter ladder."""


class DimensionMismatch(ForcefieldError, ValueError):
    pass


class EmptyInput(ForcefieldError, ValueError):
    pass


class NonPositiveResolution(ForcefieldError, ValueError):
    pass


class DegenerateTrajectory(ForcefieldError, ValueError):
    pass


class ConfigError(ForcefieldError, ValueError):
    """Invalid scenario or pipeline configuration."""
