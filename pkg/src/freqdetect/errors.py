"""Exception types shared across the package."""


class FreqDetectError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(FreqDetectError, ValueError):
    pass


class EmptyFlow(FreqDetectError, ValueError):
    pass
