"""Wavelet traces of Besov functions on the torus and their pointwise regularity."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BesovTraceError,
    ConvergenceError,
    DependencyError,
    FormatError,
    InsufficientDataError,
    ParameterError,
    UnsupportedWaveletError,
)
from .kernels import IMPLEMENTATION  # noqa: F401

__all__ = [
    "BesovTraceError",
    "ConvergenceError",
    "DependencyError",
    "FormatError",
    "InsufficientDataError",
    "ParameterError",
    "UnsupportedWaveletError",
    "IMPLEMENTATION",
    "__version__",
]
