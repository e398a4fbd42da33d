"""Coupled-mode forward model of two apodized nano-crater gratings on a nanofiber.

Forward and backward envelopes ``R(z)``, ``S(z)`` (referenced to ``exp(+-i pi z / period)``)
obey::

    R' =  i sig R + i k S
    S' = -i k R   - i sig S

with coupling ``k(z)`` proportional to the local crater depth and
``sig = 2 pi n_eff / lambda - pi / period + i alpha / 2``. The structure is cut
into short segments, each propagated by the exponential of a fourth-order
Magnus generator (exact for uniform coupling), and the segment matrices are
chained; ``t = 1 / M22`` and ``r = -M21 / M22`` for the total matrix ``M``
(``det M = 1`` identically).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import chain
from ._chain_py import segment_entries
from .core import C_VACUUM, AxisKind, Spectrum, ValidationError, check_index

DEFAULT_BRAGG = 846.5e-9
MIN_SEGMENTS_PER_WIDTH = 20
DEFAULT_SEGMENTS_PER_WIDTH = 40
#: Largest peak coupling, as a fraction of pi/period, accepted by calibration.
MAX_COUPLING_FRACTION = 0.1
#: Largest coupling-times-step accepted inside an apodized grating.
MAX_COUPLING_STEP = math.pi / 2
#: Relative wavelength excursion from the Bragg wavelength where coupled-mode theory is trusted.
VALIDITY_WINDOW = 0.1
_GAUSS_OFFSET = math.sqrt(3.0) / 6.0


class DiscretizationError(ValidationError):
    """Segmentation too coarse to resolve the apodization envelope."""


class CalibrationError(ValidationError):
    """No coupling constant reproduces the requested stopband."""


@dataclass(frozen=True)
class ApodizedGrating:
    """Nano-crater array with a Gaussian depth envelope.

    Parameters
    ----------
    period : float
        Crater pitch [m].
    num_periods : int
        Number of craters; the grating spans ``num_periods * period``.
    peak_depth : float
        Crater depth at the envelope maximum [m].
    profile_width : float
        1/e^2 full width of the depth envelope [m]; ``math.inf`` gives a
        uniform grating.
    depth_to_coupling : float
        Coupling per length per unit depth [1/m^2], so that
        ``k(z) = depth_to_coupling * depth(z)``.
    center_offset : float
        Envelope peak position relative to the grating midpoint [m].
    """

    period: float
    num_periods: int
    peak_depth: float
    profile_width: float
    depth_to_coupling: float = 0.0
    center_offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.period > 0:
            raise ValidationError("period must be positive")
        if int(self.num_periods) != self.num_periods or self.num_periods < 1:
            raise ValidationError("num_periods must be a positive integer")
        object.__setattr__(self, "num_periods", int(self.num_periods))
        if not self.profile_width > 0:
            raise ValidationError("profile_width must be positive")
        if self.peak_depth < 0:
            raise ValidationError("peak_depth must be >= 0")
        if self.depth_to_coupling < 0:
            raise ValidationError("depth_to_coupling must be >= 0")

    @property
    def extent(self) -> float:
        return self.num_periods * self.period

    @property
    def peak_coupling(self) -> float:
        return self.depth_to_coupling * self.peak_depth

    @property
    def uniform(self) -> bool:
        return math.isinf(self.profile_width)

    def depth(self, z: ArrayLike) -> NDArray[np.float64]:
        """Crater depth at ``z`` measured from the grating start."""
        z = np.asarray(z, dtype=float)
        if self.uniform:
            return np.full_like(z, self.peak_depth)
        x = z - (0.5 * self.extent + self.center_offset)
        return self.peak_depth * np.exp(-8.0 * x**2 / self.profile_width**2)

    def coupling(self, z: ArrayLike) -> NDArray[np.float64]:
        return self.depth_to_coupling * self.depth(z)

    def segments(self, segments_per_width: float = DEFAULT_SEGMENTS_PER_WIDTH):
        """Segment lengths and couplings at the two Gauss points of each segment.

        Returns ``(lengths, k1, k2)``; ``k1 == k2`` for uniform segments.
        """
        if segments_per_width < MIN_SEGMENTS_PER_WIDTH:
            raise DiscretizationError(
                f"{segments_per_width} segments per envelope width; need >= {MIN_SEGMENTS_PER_WIDTH}")
        if self.peak_coupling == 0 or self.uniform:
            k = np.array([self.peak_coupling])
            return np.array([self.extent]), k, k
        n = max(1, math.ceil(self.extent * segments_per_width / self.profile_width))
        edges = np.linspace(0.0, self.extent, n + 1)
        h = np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        if self.peak_coupling * h[0] > MAX_COUPLING_STEP:
            raise DiscretizationError(
                f"coupling x step = {self.peak_coupling * h[0]:.3g} exceeds {MAX_COUPLING_STEP:.3g}; "
                "raise segments_per_width")
        off = _GAUSS_OFFSET * h
        return h, self.coupling(mid - off), self.coupling(mid + off)


@dataclass(frozen=True)
class GratingGeometry:
    """Two gratings separated by a uniform nanofiber gap.

    The structure starts at ``z = 0`` with ``grating1``; ``gap`` is the
    distance between the inner grating edges.

    If ``bragg_wavelength`` is set, the effective index is backed out of it as
    ``bragg_wavelength / (2 period)`` and ``n_eff`` is kept only as the nominal
    value; otherwise ``n_eff`` is used as given.
    """

    grating1: ApodizedGrating
    grating2: ApodizedGrating
    gap: float
    n_eff: float = 1.2
    bragg_wavelength: Optional[float] = DEFAULT_BRAGG
    dn_dlambda: float = 0.0
    background_loss: float = 0.0
    dc_ratio: float = 0.0

    def __post_init__(self) -> None:
        if self.gap < 0:
            raise ValidationError("gap must be >= 0")
        if self.background_loss < 0:
            raise ValidationError("background_loss must be >= 0")
        if not math.isclose(self.grating1.period, self.grating2.period, rel_tol=1e-12):
            raise ValidationError("both gratings must share one period")
        check_index(self.n_eff)
        check_index(self.index)

    @property
    def period(self) -> float:
        return self.grating1.period

    @property
    def index(self) -> float:
        """Effective index at the Bragg wavelength."""
        if self.bragg_wavelength is None:
            return self.n_eff
        return self.bragg_wavelength / (2.0 * self.period)

    @property
    def bragg(self) -> float:
        return 2.0 * self.index * self.period

    @property
    def length(self) -> float:
        return self.grating1.extent + self.gap + self.grating2.extent

    def index_at(self, wavelength: ArrayLike) -> NDArray[np.float64]:
        return self.index + self.dn_dlambda * (np.asarray(wavelength, dtype=float) - self.bragg)

    def group_index(self, wavelength: float) -> float:
        return float(self.index_at(wavelength) - wavelength * self.dn_dlambda)

    def detuning(self, wavelength: ArrayLike) -> NDArray[np.complex128]:
        """Complex detuning per length, ``beta - pi/period + i alpha/2``."""
        lam = np.asarray(wavelength, dtype=float)
        delta = 2.0 * math.pi * self.index_at(lam) / lam - math.pi / self.period
        return delta + 0.5j * self.background_loss

    def reversed(self) -> "GratingGeometry":
        return replace(
            self,
            grating1=replace(self.grating2, center_offset=-self.grating2.center_offset),
            grating2=replace(self.grating1, center_offset=-self.grating1.center_offset),
        )

    def only(self, which: str) -> "GratingGeometry":
        """The geometry with the other grating's craters removed."""
        other = "grating2" if which == "grating1" else "grating1"
        return replace(self, **{other: replace(getattr(self, other), peak_depth=0.0)})

    def with_coupling(self, depth_to_coupling: float,
                      which: Iterable[str] = ("grating1", "grating2")) -> "GratingGeometry":
        return replace(self, **{w: replace(getattr(self, w), depth_to_coupling=depth_to_coupling)
                                for w in which})

    def segments(self, segments_per_width: float = DEFAULT_SEGMENTS_PER_WIDTH):
        """Kernel arrays ``(lengths, coupling, dc, skew)`` for the whole structure.

        ``coupling`` and ``dc`` are Gauss-point means; ``skew`` carries the
        fourth-order Magnus commutator weight ``sqrt(3) h^2 (k1 - k2) / 6``.
        """
        parts = [self.grating1.segments(segments_per_width)]
        if self.gap > 0:
            parts.append((np.array([self.gap]), np.zeros(1), np.zeros(1)))
        parts.append(self.grating2.segments(segments_per_width))
        h, ka, kb = (np.concatenate(x) for x in zip(*parts))
        kappa = 0.5 * (ka + kb)
        skew = math.sqrt(3.0) / 6.0 * h**2 * (ka - kb)
        return h, kappa, -self.dc_ratio * kappa, skew


def segment_matrix(local_coupling: float, detuning_per_length: float, segment_length: float,
                   loss: float = 0.0, dc: float = 0.0) -> NDArray[np.complex128]:
    """Closed-form transfer matrix of a uniform coupled-mode segment.

    Maps ``(R, S)`` at the segment start to ``(R, S)`` at its end. ``loss`` is
    the power attenuation per length.
    """
    if not segment_length > 0:
        raise ValidationError("segment_length must be positive")
    sig = detuning_per_length + dc + 0.5j * loss
    f = segment_entries(sig, local_coupling, segment_length)
    return np.array([[f[0], f[1]], [f[2], f[3]]], dtype=complex)


def _check_grid(geom: GratingGeometry, wavelengths: ArrayLike) -> NDArray[np.float64]:
    lam = np.asarray(wavelengths, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValidationError("wavelength grid must be a non-empty 1-D array")
    if lam.size > 1 and not np.all(np.diff(lam) > 0):
        raise ValidationError("wavelength grid must be strictly increasing")
    if np.any(np.abs(lam / geom.bragg - 1.0) > VALIDITY_WINDOW):
        raise ValidationError(
            f"wavelengths outside +-{VALIDITY_WINDOW:.0%} of the Bragg wavelength {geom.bragg:.6g} m")
    return lam


def transfer_matrices(geom: GratingGeometry, wavelengths: ArrayLike,
                      segments_per_width: float = DEFAULT_SEGMENTS_PER_WIDTH,
                      workers: int = 1, backend: Optional[str] = None) -> NDArray[np.complex128]:
    """Total transfer matrix per wavelength, shape ``(n, 2, 2)``.

    ``workers > 1`` splits the sweep into contiguous chunks on a thread pool;
    the result is bitwise identical to a single-chunk run.
    """
    lam = _check_grid(geom, wavelengths)
    seg = geom.segments(segments_per_width)
    sigma = geom.detuning(lam)
    fn = chain.chain_response if backend is None else chain.BACKENDS[backend]
    if workers <= 1 or lam.size < 2 * workers:
        return fn(sigma, *seg)
    chunks = np.array_split(sigma, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda s: fn(np.ascontiguousarray(s), *seg), chunks))
    return np.concatenate(parts, axis=0)


def amplitudes(geom: GratingGeometry, wavelengths: ArrayLike, **kw):
    """Complex ``(t, r)`` for light incident from the grating1 side."""
    m = transfer_matrices(geom, wavelengths, **kw)
    return 1.0 / m[:, 1, 1], -m[:, 1, 0] / m[:, 1, 1]


def simulate_spectrum(geom: GratingGeometry, wavelengths: ArrayLike,
                      segments_per_width: float = DEFAULT_SEGMENTS_PER_WIDTH,
                      workers: int = 1, backend: Optional[str] = None) -> Spectrum:
    """Power transmission and reflection on a wavelength grid [m]."""
    lam = _check_grid(geom, wavelengths)
    if lam.size < 2:
        raise ValidationError("need at least 2 wavelengths for a spectrum")
    t, r = amplitudes(geom, lam, segments_per_width=segments_per_width,
                      workers=workers, backend=backend)
    return Spectrum(lam, np.abs(t) ** 2, np.abs(r) ** 2, AxisKind.WAVELENGTH)


def find_stopband(spec: Spectrum, threshold: float = 0.1) -> tuple[float, float]:
    """Widest contiguous axis interval where transmission is below ``threshold``.

    Edges are linearly interpolated to the threshold crossing between the last
    sample inside and the first sample outside.
    """
    x = spec.axis
    y = spec.channel("transmission")
    below = y < threshold
    if not below.any():
        raise ValidationError(f"no transmission sample below {threshold}")
    padded = np.concatenate([[False], below, [False]]).astype(np.int8)
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1) - 1
    i = int(np.argmax(stops - starts))  # first widest run wins ties
    a, b = starts[i], stops[i]

    def cross(i_in, i_out):
        y0, y1 = y[i_in], y[i_out]
        return x[i_in] + (threshold - y0) / (y1 - y0) * (x[i_out] - x[i_in])

    lo = x[a] if a == 0 else cross(a, a - 1)
    hi = x[b] if b == x.size - 1 else cross(b, b + 1)
    return float(lo), float(hi)


def stopband_width(geom: GratingGeometry, wavelengths: ArrayLike, threshold: float = 0.1,
                   segments_per_width: float = DEFAULT_SEGMENTS_PER_WIDTH) -> float:
    """Stopband width of the gratings combined incoherently.

    Each grating is simulated alone and the pair is combined as
    ``T1 T2 / (1 - R1 R2)``, which removes the compound-cavity resonances that
    would otherwise punch holes in the band. Returns 0 if nothing is below
    ``threshold``.
    """
    lam = np.asarray(wavelengths, dtype=float)
    active = [w for w in ("grating1", "grating2") if getattr(geom, w).peak_coupling > 0]
    if not active:
        return 0.0
    ts, rs = [], []
    for w in active:
        s = simulate_spectrum(geom.only(w), lam, segments_per_width)
        ts.append(s.transmission)
        rs.append(s.reflection)
    if len(active) == 1:
        t = ts[0]
    else:
        t = ts[0] * ts[1] / (1.0 - rs[0] * rs[1])
    try:
        lo, hi = find_stopband(Spectrum(lam, np.clip(t, 0, 1), axis_kind=AxisKind.WAVELENGTH), threshold)
    except ValidationError:
        return 0.0
    return hi - lo


def calibrate_coupling(target_band: tuple[float, float], template: GratingGeometry,
                       which: Sequence[str] = ("grating1", "grating2"),
                       threshold: float = 0.1, rel_tol: float = 0.02,
                       segments_per_width: float = DEFAULT_SEGMENTS_PER_WIDTH) -> float:
    """Depth-to-coupling constant that reproduces a target stopband width.

    The constant is applied to the gratings named in ``which`` (the others keep
    theirs) and tuned by a 1-D root find until the -10 dB (``threshold``)
    width matches ``target_band[1] - target_band[0]``.

    Raises
    ------
    CalibrationError
        If the width cannot be reached with peak coupling below
        ``MAX_COUPLING_FRACTION * pi / period``, or the closest reachable
        width misses the target by more than ``rel_tol``.
    """
    lo, hi = target_band
    width = hi - lo
    if width < 0:
        raise ValidationError("target band is reversed")
    if width == 0:
        return 0.0
    if not (lo <= template.bragg <= hi):
        raise ValidationError(
            f"target band ({lo:.6g}, {hi:.6g}) does not contain the Bragg wavelength {template.bragg:.6g}")
    depth = max(getattr(template, w).peak_depth for w in which)
    if depth <= 0:
        raise CalibrationError("selected gratings have zero depth")

    half_span = min(max(2.5 * width, 2e-9), 0.99 * VALIDITY_WINDOW * template.bragg)
    grid = np.linspace(template.bragg - half_span, template.bragg + half_span,
                       int(np.clip(2 * half_span / (width / 500), 2000, 8000)) + 1)

    def width_at(c: float) -> float:
        return stopband_width(template.with_coupling(c, which), grid, threshold, segments_per_width)

    c_max = MAX_COUPLING_FRACTION * math.pi / template.period / depth
    # stay inside the step guard of the segmentation as well
    for w in which:
        g = getattr(template, w)
        if g.peak_depth > 0 and not g.uniform:
            h = g.extent / max(1, math.ceil(g.extent * segments_per_width / g.profile_width))
            c_max = min(c_max, MAX_COUPLING_STEP / h / g.peak_depth)
    # uniform-grating band width lambda^2 k / (pi n) gives the starting guess
    c_hi = min(math.pi * template.index * width / template.bragg**2 / depth, c_max)
    while width_at(c_hi) < width:
        if c_hi >= c_max:
            raise CalibrationError(
                f"stopband width {width:.4g} m unreachable below the coupling limit")
        c_hi = min(2.0 * c_hi, c_max)
    c_lo = c_hi / 2.0
    while width_at(c_lo) >= width and c_lo > 0:
        c_lo /= 2.0
        if c_lo < 1e-12 * c_hi:
            c_lo = 0.0
    c = brentq(lambda c: width_at(c) - width, c_lo, c_hi, xtol=1e-10 * c_hi, rtol=1e-10)
    got = width_at(c)
    if abs(got - width) > rel_tol * width:
        raise CalibrationError(
            f"closest stopband width {got:.4g} m misses target {width:.4g} m by more than {rel_tol:.0%}")
    return float(c)


# --- penetration depth by direct integration of the reflection Riccati equation ---

def _riccati_reflection(grating: ApodizedGrating, geom: GratingGeometry, sigma: complex,
                        from_end: bool, rtol: float = 1e-11) -> complex:
    """Envelope reflection coefficient at one edge of a lone grating.

    ``rho = S/R`` obeys ``rho' = -i k - 2 i sig rho - i k rho^2``; it is
    integrated from the far edge (``rho = 0``) back to the illuminated edge,
    using the continuous coupling profile.
    """
    ext = grating.extent

    def kap(u):
        z = ext - u if from_end else u
        return float(grating.coupling(z))

    def rhs(u, y):
        k = kap(u)
        s = sigma - geom.dc_ratio * k
        rho = y[0]
        return [-1j * k - 2j * s * rho - 1j * k * rho * rho]

    sol = solve_ivp(rhs, (ext, 0.0), [0j], method="DOP853", rtol=rtol, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)
    return complex(sol.y[0, -1])


def penetration_depth(geom: GratingGeometry, which: str, wavelength: float) -> float:
    """Effective mirror distance beyond the inner edge of one grating [m].

    Half the derivative of the reflection phase with respect to the propagation
    constant, seen from the gap.
    """
    grating = getattr(geom, which)
    sig0 = complex(geom.detuning(wavelength))
    h = 1e-4 * max(grating.peak_coupling, abs(sig0.real), 1.0)
    # grating1 is seen from the gap through its far end
    from_end = which == "grating1"
    rp = _riccati_reflection(grating, geom, sig0 + h, from_end)
    rm = _riccati_reflection(grating, geom, sig0 - h, from_end)
    dphi = np.angle(rp / rm)
    return 0.5 * dphi / (2.0 * h)


def predicted_mode_spacing(geom: GratingGeometry, wavelength: float) -> float:
    """Compound-cavity mode spacing [Hz] from gap plus both penetration depths."""
    lp = penetration_depth(geom, "grating1", wavelength) + penetration_depth(geom, "grating2", wavelength)
    return C_VACUUM / (2.0 * geom.group_index(wavelength) * (geom.gap + lp))
