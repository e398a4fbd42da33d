"""Cavity-QED figures of merit for an emitter coupled to a nanofiber cavity.

Rates are ordinary frequencies in Hz. The angular-frequency relations

    2 g0 = 2 sqrt(eta * gamma * c / L),   kappa = pi c / (F L)

are evaluated through :func:`nfcavity.core.angular` and converted back, so
that ``kappa * F`` equals the free spectral range ``c / (2 L)`` in Hz.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .core import C_VACUUM, ValidationError, angular

#: Cesium D2 natural linewidth, Hz. Literature constant, not a fitted value.
CS_D2_LINEWIDTH = 5.2e6

#: Channeling efficiency for a Cs atom 200 nm from a 500 nm nanofiber,
#: from :func:`invert_channeling_efficiency` against the cooperativity bands
#: C = 3 at kappa = 170 MHz and C = 10 at kappa = 50 MHz (FSR 10.36 GHz).
ETA_CS_200NM = 0.038


class Regime(str, enum.Enum):
    STRONG_COUPLING = "strong_coupling"
    PURCELL = "purcell"
    WEAK = "weak"


@dataclass(frozen=True)
class EmitterParams:
    """Emitter rates (Hz) and channeling efficiency into the guided mode."""

    gamma0: float
    gamma: float
    eta: float
    gamma_bounds: tuple[float, float] = (0.5, 5.0)

    def __post_init__(self) -> None:
        if not self.gamma0 > 0:
            raise ValidationError("gamma0 must be positive")
        lo, hi = self.gamma_bounds
        if not (lo * self.gamma0 <= self.gamma <= hi * self.gamma0):
            raise ValidationError(
                f"gamma/gamma0 = {self.gamma / self.gamma0:.3g} outside [{lo}, {hi}]")
        if not (0 <= self.eta < 1):
            raise ValidationError(f"eta must be in [0, 1), got {self.eta}")

    def scaled(self, factor: float) -> "EmitterParams":
        """Same emitter with the channeling efficiency multiplied by ``factor``."""
        return replace(self, eta=self.eta * factor)


PRESETS = {
    "cs-200nm": EmitterParams(CS_D2_LINEWIDTH, CS_D2_LINEWIDTH, ETA_CS_200NM),
    # emitter on the fiber surface: channeling about five times higher
    "surface-emitter": EmitterParams(CS_D2_LINEWIDTH, CS_D2_LINEWIDTH, 5 * ETA_CS_200NM),
    "none": EmitterParams(CS_D2_LINEWIDTH, CS_D2_LINEWIDTH, 0.0),
}


def preset(name: str) -> EmitterParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown emitter preset {name!r}; choose from {sorted(PRESETS)}") from None


def rabi_frequency(e: EmitterParams, optical_length: float) -> float:
    """Single-photon Rabi frequency 2g0 [Hz] for cavity optical length [m]."""
    if not optical_length > 0:
        raise ValidationError("optical length must be positive")
    return 2.0 * math.sqrt(e.eta * angular(e.gamma) * C_VACUUM / optical_length) / (2.0 * math.pi)


def cavity_linewidth(finesse: float, optical_length: float) -> float:
    """Linewidth kappa [Hz] = c / (2 F L)."""
    if not (finesse > 0 and optical_length > 0):
        raise ValidationError("finesse and optical length must be positive")
    return C_VACUUM / (2.0 * finesse * optical_length)


def cooperativity(e: EmitterParams, finesse: float) -> float:
    """``4 eta F / pi``, the gamma ~ gamma0 form."""
    if not finesse > 0:
        raise ValidationError("finesse must be positive")
    return 4.0 * e.eta * finesse / math.pi


def exact_cooperativity(rabi2g0: float, kappa: float, gamma0: float) -> float:
    """``(2g0)^2 / (kappa gamma0)``; unit-free, so Hz inputs are fine."""
    if kappa <= 0 or gamma0 <= 0:
        raise ValidationError("cooperativity undefined for zero kappa or gamma0")
    return rabi2g0**2 / (kappa * gamma0)


def classify_regime(rabi2g0: float, kappa: float, gamma0: float, c_threshold: float = 1.0) -> Regime:
    """Strong coupling when 2g0 >= kappa and 2g0 > gamma0.

    Purcell when kappa strictly exceeds both 2g0 and gamma0 and the
    cooperativity reaches ``c_threshold``; weak otherwise. The tie 2g0 == kappa
    goes to strong coupling.
    """
    if min(rabi2g0, kappa, gamma0) < 0:
        raise ValidationError("rates must be >= 0")
    c = exact_cooperativity(rabi2g0, kappa, gamma0)
    if rabi2g0 >= kappa and rabi2g0 > gamma0:
        return Regime.STRONG_COUPLING
    if kappa > rabi2g0 and kappa > gamma0 and c >= c_threshold:
        return Regime.PURCELL
    return Regime.WEAK


@dataclass(frozen=True)
class QedPoint:
    finesse: float
    kappa: float
    rabi2g0: float
    cooperativity: float
    cooperativity_exact: float
    regime: Regime

    @property
    def gamma_ratio(self) -> float:
        """gamma/gamma0 implied by the exact and approximate cooperativities."""
        return self.cooperativity_exact / self.cooperativity if self.cooperativity else math.nan


def sweep_figure4(e: EmitterParams, optical_length: float, finesse_list: Iterable[float],
                  c_threshold: float = 1.0) -> list[QedPoint]:
    """Linewidth, Rabi frequency, cooperativity and regime for each finesse."""
    fs = [float(f) for f in finesse_list]
    if not fs:
        raise ValidationError("finesse list is empty")
    g = rabi_frequency(e, optical_length)
    out = []
    for f in fs:
        k = cavity_linewidth(f, optical_length)
        out.append(QedPoint(
            finesse=f,
            kappa=k,
            rabi2g0=g,
            cooperativity=cooperativity(e, f),
            cooperativity_exact=exact_cooperativity(g, k, e.gamma0),
            regime=classify_regime(g, k, e.gamma0, c_threshold),
        ))
    return out


def invert_channeling_efficiency(anchors: Iterable[tuple[float, float]],
                                 eta_range: tuple[float, float] = (0.01, 0.10),
                                 step: float = 1e-4) -> float:
    """Brute-force scan for the eta that best matches (finesse, cooperativity) pairs.

    Minimizes the summed squared mismatch of ``4 eta F / pi`` over a uniform
    grid of eta values.
    """
    pts = np.array(list(anchors), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValidationError("anchors must be (finesse, cooperativity) pairs")
    n = int(round((eta_range[1] - eta_range[0]) / step))
    etas = eta_range[0] + step * np.arange(n + 1)
    pred = 4.0 * etas[:, None] * pts[None, :, 0] / math.pi
    err = np.sum((pred - pts[None, :, 1]) ** 2, axis=1)
    return float(etas[int(np.argmin(err))])
