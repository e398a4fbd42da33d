"""Resonance detection and line-shape fitting.

Lorentzian model (``fwhm`` is the linewidth kappa)::

    y(x) = baseline + amplitude * (fwhm/2)^2 / ((x - center)^2 + (fwhm/2)^2)

Gaussian crater-profile model (1/e^2 full width)::

    d(z) = baseline + peak * exp(-8 (z - center)^2 / width^2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.signal import find_peaks

from .core import C_VACUUM, Spectrum, ValidationError, check_index
from .lm import LMResult, SingularFitError, levenberg_marquardt

#: Reflection-dip fits with a larger RMS residual are not used for R0.
REFLECTION_RMS_GATE = 0.02


class FitError(ValidationError):
    """The data cannot support the requested fit."""


@dataclass(frozen=True)
class PeakCandidate:
    index: int
    location: float
    height: float
    prominence: float
    #: sample slice ``[lo, hi)`` of the half-distance window around the peak
    window: tuple[int, int]


def detect_peaks(spec: Spectrum, min_prominence: float = 0.05,
                 min_spacing: float = 0.0, channel: str = "transmission",
                 dips: bool = False, log: bool = False) -> list[PeakCandidate]:
    """Local maxima (or minima with ``dips``) ranked by topographic prominence.

    With ``log`` the search runs on ``log10`` of the channel and prominence is
    in decades; useful inside deep stopbands where resonances are many orders
    of magnitude below unity. Peaks closer than ``min_spacing`` (axis units) to
    a more prominent one are dropped; equal prominence keeps the lower axis
    value.
    """
    if not (min_prominence > 0):
        raise ValidationError("min_prominence must be positive")
    if not log and min_prominence > 1:
        raise ValidationError("min_prominence must be in (0, 1] on a linear scale")
    y = spec.channel(channel)
    x = spec.axis
    if log:
        y = np.log10(np.maximum(y, np.finfo(float).tiny))
    s = -y if dips else y
    idx, props = find_peaks(s, prominence=min_prominence)
    prom = props["prominences"]

    order = sorted(range(idx.size), key=lambda j: (-prom[j], x[idx[j]]))
    kept: list[int] = []
    for j in order:
        if all(abs(x[idx[j]] - x[idx[k]]) >= min_spacing for k in kept):
            kept.append(j)
    kept.sort(key=lambda j: idx[j])

    out = []
    n = x.size
    for pos, j in enumerate(kept):
        i = int(idx[j])
        if pos == 0:
            lo = 0
        else:
            mid = 0.5 * (x[idx[kept[pos - 1]]] + x[i])
            lo = int(np.searchsorted(x, mid, side="left"))
        if pos == len(kept) - 1:
            hi = n
        else:
            mid = 0.5 * (x[i] + x[idx[kept[pos + 1]]])
            hi = int(np.searchsorted(x, mid, side="left"))
        out.append(PeakCandidate(i, float(x[i]), float(spec.channel(channel)[i]),
                                 float(prom[j]), (lo, hi)))
    return out


# --- Lorentzian -------------------------------------------------------------

@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    amplitude: float
    baseline: float
    covariance: NDArray[np.float64]
    residual_rms: float
    converged: bool
    n_iter: int = 0
    cost_trace: tuple[float, ...] = ()

    @property
    def errors(self) -> NDArray[np.float64]:
        """1-sigma errors of (center, fwhm, amplitude, baseline)."""
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def extremum(self) -> float:
        """Model value at the line center."""
        return self.baseline + self.amplitude

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        return lorentzian(x, self.center, self.fwhm, self.amplitude, self.baseline)


def lorentzian(x, center, fwhm, amplitude, baseline):
    h2 = 0.25 * fwhm * fwhm
    return baseline + amplitude * h2 / ((np.asarray(x) - center) ** 2 + h2)


def _lorentz_res_jac(x, y):
    def res(p):
        return lorentzian(x, *p) - y

    def jac(p):
        c, w, a, _ = p
        h2 = 0.25 * w * w
        u = x - c
        den = u * u + h2
        L = h2 / den
        return np.column_stack([
            a * 2.0 * u * h2 / den**2,
            a * 0.5 * w * u * u / den**2,
            L,
            np.ones_like(x),
        ])

    return res, jac


def _edge_median(y: NDArray) -> float:
    k = max(1, y.size // 10)
    return float(np.median(np.concatenate([y[:k], y[-k:]])))


def guess_lorentzian(x: NDArray, y: NDArray, dip: Optional[bool] = None):
    """Initial (center, fwhm, amplitude, baseline) from the samples.

    Center at the extreme sample, baseline from the window-edge median,
    amplitude = extreme minus baseline, fwhm from interpolated half-maximum
    crossings.
    """
    base = _edge_median(y)
    if dip is None:
        dip = (base - y.min()) > (y.max() - base)
    i = int(np.argmin(y) if dip else np.argmax(y))
    amp = y[i] - base
    half = base + 0.5 * amp
    s = (y - half) * np.sign(amp) if amp != 0 else y * 0

    def crossing(step):
        j = i
        while 0 <= j + step < y.size and s[j + step] > 0:
            j += step
        k = j + step
        if not 0 <= k < y.size:
            return None
        f = s[j] / (s[j] - s[k])
        return x[j] + f * (x[k] - x[j])

    left, right = crossing(-1), crossing(+1)
    if left is not None and right is not None:
        w = right - left
    elif left is not None:
        w = 2 * (x[i] - left)
    elif right is not None:
        w = 2 * (right - x[i])
    else:
        w = 0.25 * (x[-1] - x[0])
    if not w > 0:
        w = 2.0 * float(np.min(np.diff(x)))
    return float(x[i]), float(w), float(amp), base


def fit_lorentzian(x: ArrayLike, y: ArrayLike, initial_guess: Optional[Sequence[float]] = None,
                   dip: Optional[bool] = None, max_iter: int = 200) -> LorentzianFit:
    """Least-squares Lorentzian fit over one resonance window.

    Parameters
    ----------
    x, y : array_like
        Axis and power samples of the window.
    initial_guess : (center, fwhm, amplitude, baseline), optional
        Self-seeded from the data when absent (see :func:`guess_lorentzian`).
    dip : bool, optional
        Force a peak (False) or dip (True) guess; auto-detected by default.

    The fit runs on an axis shifted and scaled to the window and on ``y``
    scaled to its range, so results are equivariant under affine changes of
    either.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValidationError("x and y differ in length")
    if x.size < 8:
        raise FitError(f"window has {x.size} samples; need >= 8")
    if np.ptp(y) == 0:
        raise FitError("flat window")
    guess = guess_lorentzian(x, y, dip) if initial_guess is None else tuple(map(float, initial_guess))
    c0, w0, a0, b0 = guess
    if x[-1] - x[0] < 2.0 * abs(w0):
        raise FitError("window spans less than 2 estimated linewidths")

    xs, xw = 0.5 * (x[0] + x[-1]), 0.5 * (x[-1] - x[0])
    ys, yw = float(np.min(y)), float(np.ptp(y))
    xn = (x - xs) / xw
    yn = (y - ys) / yw
    p0 = [(c0 - xs) / xw, abs(w0) / xw, a0 / yw, (b0 - ys) / yw]
    res, jac = _lorentz_res_jac(xn, yn)
    try:
        out = levenberg_marquardt(res, jac, p0, max_iter=max_iter)
    except SingularFitError as exc:
        raise FitError(f"singular normal equations: {exc}") from exc
    return _lorentz_result(out, xs, xw, ys, yw, x, y)


def _lorentz_result(out: LMResult, xs, xw, ys, yw, x, y) -> LorentzianFit:
    c, w, a, b = out.params
    scale = np.array([xw, xw, yw, yw])
    cov = out.covariance * np.outer(scale, scale)
    center, fwhm, amp, base = c * xw + xs, abs(w) * xw, a * yw, b * yw + ys
    rms = float(np.sqrt(np.mean((lorentzian(x, center, fwhm, amp, base) - y) ** 2)))
    return LorentzianFit(center, fwhm, amp, base, cov, rms, out.converged, out.n_iter,
                         tuple(t * yw * yw for t in out.trace))


# --- Gaussian crater profile ------------------------------------------------

@dataclass(frozen=True)
class GaussianFit:
    center: float
    peak: float
    width_1e2: float
    baseline: float
    covariance: NDArray[np.float64]
    converged: bool
    residual_rms: float = 0.0
    cost_trace: tuple[float, ...] = ()

    def __call__(self, z: ArrayLike) -> NDArray[np.float64]:
        return gaussian_profile(z, self.center, self.peak, self.width_1e2, self.baseline)


def gaussian_profile(z, center, peak, width, baseline):
    return baseline + peak * np.exp(-8.0 * (np.asarray(z) - center) ** 2 / width**2)


def fit_gaussian_profile(z: ArrayLike, depth: ArrayLike, max_iter: int = 200) -> GaussianFit:
    """Gaussian fit to a crater-depth profile ``depth(z)``; lengths in meters."""
    z = np.asarray(z, dtype=float)
    d = np.asarray(depth, dtype=float)
    if z.size != d.size or z.size < 8:
        raise FitError("need >= 8 (z, depth) points of equal length")
    if np.any(d < 0):
        raise ValidationError("depths must be >= 0")
    if np.ptp(d) == 0:
        raise FitError("degenerate profile: all depths equal")
    order = np.argsort(z)
    z, d = z[order], d[order]

    base = float(d.min())
    i = int(np.argmax(d))
    peak = float(d[i] - base)
    above = z[d - base >= peak * math.exp(-2.0)]
    width = float(above[-1] - above[0]) if above.size > 1 else float(np.ptp(z)) / 4
    if not width > 0:
        width = float(np.min(np.diff(z))) * 2

    zs, zw = 0.5 * (z[0] + z[-1]), 0.5 * float(np.ptp(z))
    ds, dw = float(d.min()), float(np.ptp(d))
    zn = (z - zs) / zw
    dn = (d - ds) / dw

    def res(p):
        c, a, w, b = p
        return b + a * np.exp(-8.0 * (zn - c) ** 2 / w**2) - dn

    def jac(p):
        c, a, w, _ = p
        u = zn - c
        e = np.exp(-8.0 * u * u / w**2)
        return np.column_stack([a * e * 16.0 * u / w**2, e, a * e * 16.0 * u * u / w**3, np.ones_like(zn)])

    p0 = [(z[i] - zs) / zw, peak / dw, width / zw, (base - ds) / dw]
    try:
        out = levenberg_marquardt(res, jac, p0, max_iter=max_iter)
    except SingularFitError as exc:
        raise FitError(f"singular normal equations: {exc}") from exc
    c, a, w, b = out.params
    scale = np.array([zw, dw, zw, dw])
    center, peak, width, base = c * zw + zs, a * dw, abs(w) * zw, b * dw + ds
    rms = float(np.sqrt(np.mean((gaussian_profile(z, center, peak, width, base) - d) ** 2)))
    return GaussianFit(center, peak, width, base, out.covariance * np.outer(scale, scale),
                       out.converged, rms, tuple(t * dw * dw for t in out.trace))


# --- mode table -------------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    """One cavity resonance.

    ``T0`` includes the fitted baseline; ``T0_excess`` is the Lorentzian
    amplitude above it. ``R0`` is the reflection at the dip bottom and
    ``R0_depth`` the dip depth below the reflection baseline.
    """

    center: float
    transmission: Optional[LorentzianFit]
    reflection: Optional[LorentzianFit] = None
    finesse: Optional[float] = None
    note: str = ""

    @property
    def fwhm(self) -> Optional[float]:
        return None if self.transmission is None else self.transmission.fwhm

    @property
    def T0(self) -> Optional[float]:
        return None if self.transmission is None else self.transmission.extremum

    @property
    def T0_excess(self) -> Optional[float]:
        return None if self.transmission is None else self.transmission.amplitude

    @property
    def reflection_ok(self) -> bool:
        r = self.reflection
        return r is not None and r.converged and r.residual_rms < REFLECTION_RMS_GATE

    @property
    def R0(self) -> Optional[float]:
        return self.reflection.extremum if self.reflection_ok else None

    @property
    def R0_depth(self) -> Optional[float]:
        return -self.reflection.amplitude if self.reflection_ok else None


@dataclass(frozen=True)
class ModeTable:
    modes: tuple[Mode, ...]
    fsr: Optional[float] = None
    fsr_err: Optional[float] = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def finesse(self) -> list[Optional[float]]:
        return [m.finesse for m in self.modes]

    def loss_points(self):
        """``(kappa, T0, R0)`` of modes with usable T and R fits."""
        pts = [(m.fwhm, m.T0, m.R0) for m in self.modes
               if m.transmission is not None and m.transmission.converged and m.reflection_ok]
        return [p for p in pts if 0 <= p[1] <= 1.05 and 0 <= p[2] <= 1.05]


def estimate_fsr(centers: Sequence[float]) -> tuple[float, float]:
    """Median adjacent spacing and its median absolute deviation."""
    c = np.sort(np.asarray(centers, dtype=float))
    if c.size < 2:
        raise ValidationError("need >= 2 centers")
    d = np.diff(c)
    med = float(np.median(d))
    return med, float(np.median(np.abs(d - med)))


def build_mode_table(spec: Spectrum, reflection: Optional[Spectrum] = None,
                     min_prominence: float = 0.05, min_spacing: float = 0.0,
                     window_fwhm: Optional[float] = 20.0, log_detect: bool = False) -> ModeTable:
    """Detect transmission resonances, fit them, and derive FSR and finesse.

    Parameters
    ----------
    spec : Spectrum
        Must carry transmission; a reflection channel on the same axis is used
        for the dips unless ``reflection`` is given separately.
    window_fwhm : float or None
        Restrict each fit to +-``window_fwhm`` estimated linewidths inside the
        half-distance window (None uses the whole window).
    log_detect : bool
        Detect on log10(T); ``min_prominence`` is then in decades.
    """
    spec = spec.to_frequency()
    x = spec.axis
    T = spec.channel("transmission")
    R = None
    if reflection is not None:
        reflection = reflection.to_frequency()
        if not np.array_equal(reflection.axis, x):
            raise ValidationError("reflection spectrum must share the transmission axis")
        R = reflection.channel("reflection")
    elif spec.reflection is not None:
        R = spec.reflection

    cands = detect_peaks(spec, min_prominence, min_spacing, log=log_detect)
    notes = []
    modes = []
    for cand in cands:
        lo, hi = cand.window
        xw, tw = x[lo:hi], T[lo:hi]
        sel = slice(None)
        tfit = rfit = None
        note = ""
        try:
            if window_fwhm is not None:
                c0, w0, _, _ = guess_lorentzian(xw, tw, dip=False)
                keep = np.abs(xw - c0) <= window_fwhm * w0
                if np.count_nonzero(keep) >= 8:
                    sel = keep
            tfit = fit_lorentzian(xw[sel], tw[sel], dip=False)
            if not tfit.converged:
                note = "transmission fit did not converge"
        except ValidationError as exc:
            note = f"transmission fit failed: {exc}"
        if R is not None and tfit is not None:
            try:
                rfit = fit_lorentzian(xw[sel], R[lo:hi][sel], dip=True)
            except ValidationError as exc:
                note = (note + "; " if note else "") + f"reflection fit failed: {exc}"
        center = tfit.center if tfit is not None and tfit.converged else cand.location
        modes.append(Mode(center, tfit, rfit, note=note))

    fsr = fsr_err = None
    if len(modes) >= 2:
        fsr, fsr_err = estimate_fsr([m.center for m in modes])
        modes = [Mode(m.center, m.transmission, m.reflection,
                      fsr / m.fwhm if m.fwhm else None, m.note) for m in modes]
        widths = [m.fwhm for m in modes if m.fwhm]
        if widths and fsr <= max(widths):
            notes.append("fsr not larger than the widest linewidth; modes unresolved")
    else:
        notes.append(f"{len(modes)} mode(s) detected; fsr needs at least 2")
    return ModeTable(tuple(modes), fsr, fsr_err, tuple(notes))


def finesse(fsr: float, fwhm: float) -> float:
    if not (fsr > 0 and fwhm > 0):
        raise ValidationError("fsr and fwhm must be positive")
    return fsr / fwhm


def fsr_to_length(fsr: float, n_eff: float) -> float:
    """Geometric cavity length ``c / (2 n_eff fsr)`` [m]."""
    if not fsr > 0:
        raise ValidationError("fsr must be positive")
    if n_eff != 1.0:
        check_index(n_eff)
    return C_VACUUM / (2.0 * n_eff * fsr)
