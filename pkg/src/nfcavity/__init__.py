"""Simulation and analysis toolkit for long photonic-crystal nanofiber cavities."""

__version__ = "0.1.0"

from .chain import BACKEND
from .core import C_VACUUM, AxisKind, Spectrum, ValidationError, angular, optical_length

__all__ = [
    "BACKEND",
    "C_VACUUM",
    "AxisKind",
    "Spectrum",
    "ValidationError",
    "angular",
    "optical_length",
    "__version__",
]
