"""Exception hierarchy shared by every module of the package."""


class BesovTraceError(Exception):
    """Base class for all package errors."""


class ParameterError(BesovTraceError, ValueError):
    """An argument is outside the domain the operation accepts."""


class ConvergenceError(BesovTraceError, RuntimeError):
    """An iterative procedure failed to settle."""


class UnsupportedWaveletError(BesovTraceError, ValueError):
    """The wavelet lacks the regularity an operation needs."""


class DependencyError(BesovTraceError, RuntimeError):
    """A required input (e.g. wavelet samples) is missing."""


class InsufficientDataError(BesovTraceError, ValueError):
    """Too few usable scales or samples for an estimate."""


class FormatError(BesovTraceError, ValueError):
    """A serialized file does not match the expected layout."""
