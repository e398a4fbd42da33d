"""Input-output model of a two-sided lossy cavity and loss-rate extraction.

The field amplitudes of a cavity with mirror coupling rates ``kappa1``,
``kappa2`` and an intra-cavity loss rate ``kappa_s`` are::

    t = sqrt(kappa1 kappa2) / (kappa/2 + i D)
    r = ((kappa1 - kappa2 - kappa_s)/2 - i D) / (kappa/2 + i D)

with ``kappa = kappa1 + kappa2 + kappa_s`` and detuning ``D``. Only ratios of
rates enter, so everything here works directly in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import POWER_CEILING, ValidationError


@dataclass(frozen=True)
class CavityResponseParams:
    kappa1: float
    kappa2: float
    kappa_s: float
    detuning: float = 0.0

    def __post_init__(self) -> None:
        for name in ("kappa1", "kappa2", "kappa_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")
        if not math.isfinite(self.detuning):
            raise ValidationError("detuning must be finite")
        if self.kappa1 + self.kappa2 <= 0:
            raise ValidationError("zero total linewidth: kappa1 + kappa2 must be > 0")

    @property
    def kappa(self) -> float:
        return self.kappa1 + self.kappa2 + self.kappa_s

    @classmethod
    def symmetric(cls, kappa: float, kappa_s: float, detuning: float = 0.0) -> "CavityResponseParams":
        """Symmetric cavity with total linewidth ``kappa``."""
        kc = 0.5 * (kappa - kappa_s)
        return cls(kc, kc, kappa_s, detuning)


def cavity_amplitudes(p: CavityResponseParams, detuning: Optional[ArrayLike] = None):
    """Complex field transmission and reflection amplitudes ``(t, r)``.

    ``detuning`` overrides ``p.detuning`` and may be an array, which gives
    the line shape over a scan.
    """
    d = p.detuning if detuning is None else np.asarray(detuning, dtype=float)
    denom = 0.5 * p.kappa + 1j * d
    t = math.sqrt(p.kappa1 * p.kappa2) / denom
    r = (0.5 * (p.kappa1 - p.kappa2 - p.kappa_s) - 1j * d) / denom
    return t, r


def on_resonance_tr(kappa_c: float, kappa_s: float) -> tuple[float, float]:
    """On-resonance power transmission and reflection of a symmetric cavity.

    Returns ``(T0, R0) = ((2 kappa_c / kappa)**2, (kappa_s / kappa)**2)`` with
    ``kappa = 2 kappa_c + kappa_s``.
    """
    if kappa_c < 0 or kappa_s < 0:
        raise ValidationError("rates must be >= 0")
    kappa = 2.0 * kappa_c + kappa_s
    if kappa <= 0:
        raise ValidationError("kappa_c and kappa_s are both zero")
    return (2.0 * kappa_c / kappa) ** 2, (kappa_s / kappa) ** 2


def model_t0_r0(kappa: ArrayLike, kappa_s: float):
    """T0, R0 against total linewidth at a fixed loss rate."""
    x = kappa_s / np.asarray(kappa, dtype=float)
    return (1.0 - x) ** 2, x ** 2


@dataclass(frozen=True)
class LossBudget:
    """Result of fitting a single loss rate to on-resonance (kappa, T0, R0) data.

    ``kappa_c`` holds the per-mirror coupling implied at each input point,
    ``(kappa_i - kappa_s) / 2``. ``per_point_kappa_s`` is the diagnostic
    ``kappa_i * sqrt(R0_i)``, which lets the loss vary from mode to mode.
    """

    kappa_s: float
    kappa_s_err: float
    kappa_c: tuple[float, ...]
    crossing_kappa: float
    residual_rms: float
    converged: bool = True
    at_boundary: bool = False
    per_point_kappa_s: tuple[float, ...] = ()
    bootstrap_err: Optional[float] = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    def one_pass(self, fsr: float) -> float:
        return one_pass_transmission(self.kappa_s, fsr)


def _cost_poly(kappa, t0, r0, w):
    """Coefficients (highest first) of the joint squared residual in kappa_s.

    With u = 1/kappa the residuals are ``T0 - (1 - x u)^2`` and ``R0 - (x u)^2``,
    so the cost is an exact quartic in ``x``.
    """
    total = np.zeros(5)
    for k, t, r, wi in zip(kappa, t0, r0, w):
        u = 1.0 / k
        # T0 - 1 + 2 u x - u^2 x^2
        pt = np.array([-u * u, 2.0 * u, t - 1.0])
        # R0 - u^2 x^2
        pr = np.array([-u * u, 0.0, r])
        total += wi * (np.polymul(pt, pt) + np.polymul(pr, pr))
    return total


def extract_loss_rate(
    kappa: Sequence[float],
    t0: Sequence[float],
    r0: Sequence[float],
    weights: Optional[Sequence[float]] = None,
    bootstrap: int = 0,
    seed: int = 0,
    consistency_tol: float = 0.02,
) -> LossBudget:
    """Fit one loss rate to on-resonance T0 and R0 measured at several linewidths.

    The joint weighted residual of both curves is a quartic in ``kappa_s``; its
    minimum on ``[0, min(kappa)]`` is found exactly from the roots of the
    derivative. The 1-sigma uncertainty comes from the curvature of the cost at
    the minimum, scaled by the residual variance.

    Parameters
    ----------
    kappa : sequence of float
        Total linewidths in Hz.
    t0, r0 : sequence of float
        On-resonance transmission and reflection.
    weights : sequence of float, optional
        One weight per point, applied to both its T0 and R0 residuals.
    bootstrap : int
        If > 0, also report the standard deviation of ``kappa_s`` over this many
        point resamples (seeded, reproducible).
    """
    k = np.asarray(kappa, dtype=float)
    t = np.asarray(t0, dtype=float)
    r = np.asarray(r0, dtype=float)
    w = np.ones_like(k) if weights is None else np.asarray(weights, dtype=float)
    if not (k.shape == t.shape == r.shape == w.shape) or k.ndim != 1:
        raise ValidationError("kappa, T0, R0 and weights must be equal-length 1-D sequences")
    if k.size < 2:
        raise ValidationError("need at least 2 points")
    if np.any(~np.isfinite(k)) or np.any(k <= 0):
        raise ValidationError("linewidths must be positive")
    for name, a in (("T0", t), ("R0", r)):
        if np.any(a < 0) or np.any(a > POWER_CEILING) or np.any(~np.isfinite(a)):
            raise ValidationError(f"{name} outside [0, {POWER_CEILING}]")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValidationError("weights must be >= 0 and not all zero")

    poly = _cost_poly(k, t, r, w)
    x_hat, cost = _minimize_quartic(poly, float(k.min()))
    curvature = np.polyval(np.polyder(poly, 2), x_hat)
    n_res = 2 * int(np.count_nonzero(w))
    dof = max(n_res - 1, 1)
    # var(x) = s^2 / (J^T J) with J^T J = cost'' / 2 and s^2 = cost / dof
    err = math.sqrt(2.0 * cost / (dof * curvature)) if curvature > 0 else math.inf
    rms = math.sqrt(cost / (n_res * np.mean(w[w > 0])))

    span = float(k.min())
    at_boundary = x_hat <= 1e-12 * span or x_hat >= span * (1 - 1e-12)
    converged = True
    notes = []
    if np.ptp(k) == 0 and rms > consistency_tol:
        converged = False
        notes.append("all linewidths equal and T0/R0 inconsistent with a single loss rate")
    if at_boundary:
        notes.append("loss rate at search boundary")

    boot = None
    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        vals = []
        for _ in range(bootstrap):
            idx = rng.integers(0, k.size, k.size)
            xb, _ = _minimize_quartic(_cost_poly(k[idx], t[idx], r[idx], w[idx]), float(k[idx].min()))
            vals.append(xb)
        boot = float(np.std(vals, ddof=1))

    return LossBudget(
        kappa_s=float(x_hat),
        kappa_s_err=float(err),
        kappa_c=tuple(float(v) for v in 0.5 * (k - x_hat)),
        crossing_kappa=2.0 * float(x_hat),
        residual_rms=float(rms),
        converged=converged,
        at_boundary=bool(at_boundary),
        per_point_kappa_s=tuple(float(v) for v in k * np.sqrt(r)),
        bootstrap_err=boot,
        notes=tuple(notes),
    )


def _minimize_quartic(poly: NDArray[np.float64], upper: float) -> tuple[float, float]:
    # normalize to x in [0, 1] to keep the root finder well conditioned
    scaled = poly * upper ** np.arange(poly.size - 1, -1, -1)
    cands = [0.0, 1.0]
    for z in np.roots(np.polyder(scaled)):
        if abs(z.imag) <= 1e-9 * max(1.0, abs(z.real)) and 0.0 < z.real < 1.0:
            cands.append(float(z.real))
    cands = np.array(cands)
    vals = np.polyval(scaled, cands)
    i = int(np.argmin(vals))
    x = cands[i]
    # one Newton polish step on the exact derivative
    if 0.0 < x < 1.0:
        d1 = np.polyval(np.polyder(scaled, 1), x)
        d2 = np.polyval(np.polyder(scaled, 2), x)
        if d2 > 0:
            xn = x - d1 / d2
            if 0.0 < xn < 1.0 and np.polyval(scaled, xn) <= vals[i]:
                x = xn
    return x * upper, max(float(np.polyval(scaled, x)), 0.0)


def one_pass_transmission(kappa_s: float, fsr: float) -> float:
    """Fraction of power surviving one pass through the cavity interior.

    The round-trip loss is ``2 pi kappa_s / fsr`` (loss-limited finesse
    ``fsr / kappa_s``), and one pass takes half of it.
    """
    if fsr <= 0:
        raise ValidationError("fsr must be positive")
    if not (0 <= kappa_s < fsr / math.pi):
        raise ValidationError(
            f"kappa_s={kappa_s} outside [0, fsr/pi): loss too large for the linearized model")
    return 1.0 - math.pi * kappa_s / fsr


def one_pass_uncertainty(kappa_s: float, kappa_s_err: float, fsr: float, fsr_err: float = 0.0) -> float:
    """First-order propagated 1-sigma error of :func:`one_pass_transmission`."""
    a = math.pi * kappa_s_err / fsr
    b = math.pi * kappa_s * fsr_err / fsr ** 2
    return math.hypot(a, b)
