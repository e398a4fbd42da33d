"""Shared types and unit conventions.

All rates (linewidths, loss rates, FSR, emission rates) are stored as ordinary
frequencies in Hz. Formulas written in angular frequency go through
:func:`angular`. Lengths are in meters.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

C_VACUUM = 299_792_458.0  # m/s, exact

#: Power values above this are treated as corrupt rather than noisy.
POWER_CEILING = 1.05

#: Guided-mode index bounds for a silica nanofiber.
INDEX_BOUNDS = (1.0, 1.5)


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class AxisKind(str, enum.Enum):
    FREQUENCY = "frequency_Hz"
    WAVELENGTH = "wavelength_m"


def angular(rate: float) -> float:
    """Convert an ordinary-frequency rate (Hz) to angular frequency (rad/s)."""
    if not np.all(np.isfinite(rate)):
        raise ValidationError(f"rate must be finite, got {rate}")
    return 2.0 * math.pi * rate


def check_index(n_eff: float, bounds: tuple[float, float] = INDEX_BOUNDS) -> float:
    lo, hi = bounds
    if not (lo < n_eff < hi):
        raise ValidationError(f"effective index {n_eff} outside ({lo}, {hi})")
    return float(n_eff)


def optical_length(length: float, n_eff: float,
                   bounds: tuple[float, float] = INDEX_BOUNDS) -> float:
    """Optical length ``n_eff * length`` of a geometric length in meters.

    ``n_eff == 1`` is accepted as the vacuum identity even though it sits on the
    open lower bound.
    """
    if not length > 0:
        raise ValidationError(f"length must be positive, got {length}")
    if n_eff != 1.0:
        check_index(n_eff, bounds)
    return n_eff * length


def wavelength_to_frequency(x: ArrayLike) -> NDArray[np.float64]:
    return C_VACUUM / np.asarray(x, dtype=float)


frequency_to_wavelength = wavelength_to_frequency


def _freeze(a: Optional[ArrayLike]) -> Optional[NDArray[np.float64]]:
    if a is None:
        return None
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sampled transmission and/or reflection on a strictly increasing axis.

    Parameters
    ----------
    axis : array_like
        Frequency in Hz or wavelength in m, strictly increasing.
    transmission, reflection : array_like or None
        Normalized power, in ``[0, POWER_CEILING]``. Either may be absent,
        not both.
    axis_kind : AxisKind
    """

    axis: NDArray[np.float64]
    transmission: Optional[NDArray[np.float64]] = None
    reflection: Optional[NDArray[np.float64]] = None
    axis_kind: AxisKind = AxisKind.FREQUENCY

    def __post_init__(self) -> None:
        object.__setattr__(self, "axis", _freeze(self.axis))
        object.__setattr__(self, "transmission", _freeze(self.transmission))
        object.__setattr__(self, "reflection", _freeze(self.reflection))
        object.__setattr__(self, "axis_kind", AxisKind(self.axis_kind))

        x = self.axis
        if x.ndim != 1 or x.size < 2:
            raise ValidationError("spectrum needs at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise ValidationError("axis contains non-finite values")
        if not np.all(np.diff(x) > 0):
            raise ValidationError("axis must be strictly increasing")
        if self.transmission is None and self.reflection is None:
            raise ValidationError("spectrum has neither transmission nor reflection")
        for name in ("transmission", "reflection"):
            y = getattr(self, name)
            if y is None:
                continue
            if y.shape != x.shape:
                raise ValidationError(f"{name} length {y.size} != axis length {x.size}")
            if not np.all(np.isfinite(y)):
                raise ValidationError(f"{name} contains non-finite values")
            if np.any(y < 0):
                raise ValidationError(f"{name} has negative power")
            if np.any(y > POWER_CEILING):
                raise ValidationError(f"{name} exceeds {POWER_CEILING}")

    def __len__(self) -> int:
        return self.axis.size

    def channel(self, name: str) -> NDArray[np.float64]:
        y = getattr(self, name)
        if y is None:
            raise ValidationError(f"spectrum has no {name} channel")
        return y

    def to_frequency(self) -> "Spectrum":
        """Same data on an increasing frequency axis."""
        if self.axis_kind is AxisKind.FREQUENCY:
            return self
        rev = slice(None, None, -1)
        return Spectrum(
            wavelength_to_frequency(self.axis)[rev],
            None if self.transmission is None else self.transmission[rev],
            None if self.reflection is None else self.reflection[rev],
            AxisKind.FREQUENCY,
        )

    def to_wavelength(self) -> "Spectrum":
        if self.axis_kind is AxisKind.WAVELENGTH:
            return self
        rev = slice(None, None, -1)
        return Spectrum(
            frequency_to_wavelength(self.axis)[rev],
            None if self.transmission is None else self.transmission[rev],
            None if self.reflection is None else self.reflection[rev],
            AxisKind.WAVELENGTH,
        )

    def slice(self, lo: int, hi: int) -> "Spectrum":
        """Samples ``lo:hi`` as a new spectrum."""
        return Spectrum(
            self.axis[lo:hi],
            None if self.transmission is None else self.transmission[lo:hi],
            None if self.reflection is None else self.reflection[lo:hi],
            self.axis_kind,
        )
