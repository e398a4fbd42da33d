import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.signal import find_peaks, peak_widths

from nfcavity.chain import BACKENDS
from nfcavity.core import C_VACUUM, ValidationError
from nfcavity.gratingsim import (
    ApodizedGrating,
    CalibrationError,
    DiscretizationError,
    GratingGeometry,
    amplitudes,
    calibrate_coupling,
    find_stopband,
    penetration_depth,
    predicted_mode_spacing,
    segment_matrix,
    simulate_spectrum,
    stopband_width,
    transfer_matrices,
)

BAND = np.linspace(842e-9, 851e-9, 2001)


def uniform_geometry(kappa, num_periods=4000, **kw):
    g = ApodizedGrating(350e-9, num_periods, 1e-7, math.inf, depth_to_coupling=kappa / 1e-7)
    empty = dataclasses.replace(g, peak_depth=0.0)
    return GratingGeometry(g, empty, gap=0.0, **kw)


def lossless(geom):
    return dataclasses.replace(geom, background_loss=0.0)


# --- single segments ---------------------------------------------------------

@pytest.mark.parametrize("k,d,ell", [(2e4, 0.0, 1e-4), (2e4, 3e4, 5e-5), (0.0, 1e5, 1e-3), (1e4, 1e4, 2e-4)])
def test_segment_unimodular_and_semigroup(k, d, ell):
    m = segment_matrix(k, d, ell)
    assert abs(abs(np.linalg.det(m)) - 1) < 1e-12
    half = segment_matrix(k, d, ell / 2)
    assert np.allclose(half @ half, m, rtol=0, atol=1e-13)


def test_segment_zero_coupling_is_phase():
    d, ell = 1e5, 1e-3
    m = segment_matrix(0.0, d, ell)
    assert np.allclose(m, np.diag([np.exp(1j * d * ell), np.exp(-1j * d * ell)]), atol=1e-15)


def test_segment_lossy_attenuates():
    m = segment_matrix(0.0, 0.0, 1.0, loss=2.0)
    assert abs(m[0, 0]) == pytest.approx(math.exp(-1.0), rel=1e-14)


def test_segment_matches_ode():
    k, d, ell = 3e4, 1e4, 1e-4

    def rhs(z, y):
        return [1j * d * y[0] + 1j * k * y[1], -1j * k * y[0] - 1j * d * y[1]]

    cols = [solve_ivp(rhs, (0, ell), y0, rtol=1e-12, atol=1e-14).y[:, -1] for y0 in ([1j * 0 + 1, 0j], [0j, 1 + 0j])]
    assert np.allclose(np.column_stack(cols), segment_matrix(k, d, ell), atol=1e-10)


# --- whole structures -------------------------------------------------------

@pytest.mark.parametrize("kl", [0.5, 1.0, 2.0])
def test_uniform_peak_reflectance_oracle(kl):
    L = 4000 * 350e-9
    geom = uniform_geometry(kl / L)
    lam = geom.bragg * np.array([1 - 1e-6, 1.0, 1 + 1e-6])
    s = simulate_spectrum(geom, lam)
    assert s.reflection[1] == pytest.approx(math.tanh(kl) ** 2, abs=1e-12)


def test_uniform_penetration_depth_oracle():
    k = 2000.0
    geom = uniform_geometry(k)
    L = geom.grating1.extent
    assert penetration_depth(geom, "grating1", geom.bragg) == pytest.approx(math.tanh(k * L) / (2 * k), rel=1e-6)


def _lone_grating1(geom):
    geom = lossless(geom).only("grating1")
    g = geom.grating1
    return dataclasses.replace(geom, gap=0.0, grating2=dataclasses.replace(g, num_periods=1, peak_depth=0.0))


def _ode_power(geom, lam):
    g = geom.grating1
    sig = complex(geom.detuning(lam))

    def rhs(z, y):
        k = float(g.coupling(z))
        return [1j * sig * y[0] + 1j * k * y[1], -1j * k * y[0] - 1j * sig * y[1]]

    cols = [solve_ivp(rhs, (0, g.extent), y0, method="DOP853", rtol=1e-12, atol=1e-15).y[:, -1]
            for y0 in ([1 + 0j, 0j], [0j, 1 + 0j])]
    m = np.column_stack(cols)
    return abs(1 / m[1, 1]) ** 2, abs(m[1, 0] / m[1, 1]) ** 2


def test_apodized_grating_matches_ode(compound_geometry):
    geom = _lone_grating1(compound_geometry)
    lam = np.array([844.0e-9, 845.5e-9, 846.5e-9, 848.2e-9, 849.0e-9])
    t, r = amplitudes(geom, lam, segments_per_width=160)
    for lam_i, t_i, r_i in zip(lam, t, r):
        T, R = _ode_power(geom, lam_i)
        assert abs(t_i) ** 2 == pytest.approx(T, abs=1e-7)
        assert abs(r_i) ** 2 == pytest.approx(R, abs=1e-7)


def test_segmentation_is_fourth_order(compound_geometry):
    geom = _lone_grating1(compound_geometry)
    lam = 848.2e-9  # first sidelobe, the slowest-converging point
    T, _ = _ode_power(geom, lam)
    err = [abs(abs(amplitudes(geom, np.array([lam]), segments_per_width=s)[0][0]) ** 2 - T) for s in (40, 80)]
    assert err[0] < 1e-5
    assert 10 < err[0] / err[1] < 25


def test_lossless_energy_conservation(compound_geometry):
    s = simulate_spectrum(lossless(compound_geometry), BAND)
    assert np.max(np.abs(s.transmission + s.reflection - 1)) < 1e-10


def test_loss_reduces_throughput(compound_geometry):
    s0 = simulate_spectrum(lossless(compound_geometry), BAND)
    s1 = simulate_spectrum(compound_geometry, BAND)
    s2 = simulate_spectrum(dataclasses.replace(compound_geometry, background_loss=4 * compound_geometry.background_loss), BAND)
    total = [s.transmission + s.reflection for s in (s0, s1, s2)]
    assert np.all(total[1] <= total[0] + 1e-12) and np.all(total[2] <= total[1] + 1e-12)
    assert np.min(total[2]) < np.min(total[1]) < 1 - 1e-3


def test_zero_depth_is_transparent(data_dir):
    from nfcavity import io
    s = simulate_spectrum(io.read_geometry(data_dir / "zero_depth.geom"), BAND)
    assert np.allclose(s.transmission, 1.0, atol=1e-15) and np.allclose(s.reflection, 0.0, atol=1e-15)


def test_reciprocity(compound_geometry):
    a = simulate_spectrum(compound_geometry, BAND)
    b = simulate_spectrum(compound_geometry.reversed(), BAND)
    assert np.max(np.abs(a.transmission - b.transmission)) < 1e-10


def test_grid_convergence(compound_geometry):
    lam = np.linspace(843e-9, 850e-9, 4001)
    a = simulate_spectrum(compound_geometry, lam, segments_per_width=40)
    b = simulate_spectrum(compound_geometry, lam, segments_per_width=80)
    assert np.max(np.abs(a.transmission - b.transmission)) < 1e-4
    # reflection of each lone grating too; the compound reflection has 15 MHz
    # modes whose tiny shifts are not a smoothness measure
    for which in ("grating1", "grating2"):
        g = compound_geometry.only(which)
        ra = simulate_spectrum(g, lam, segments_per_width=40).reflection
        rb = simulate_spectrum(g, lam, segments_per_width=80).reflection
        assert np.max(np.abs(ra - rb)) < 1e-4


@pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
def test_backends_agree(compound_geometry):
    a = transfer_matrices(compound_geometry, BAND, backend="compiled")
    b = transfer_matrices(compound_geometry, BAND, backend="python")
    rel = np.abs(a - b).max(axis=(1, 2)) / np.abs(a).max(axis=(1, 2))
    assert rel.max() < 1e-10


def test_workers_bitwise_identical(compound_geometry):
    a = transfer_matrices(compound_geometry, BAND, workers=1)
    b = transfer_matrices(compound_geometry, BAND, workers=3)
    assert np.array_equal(a, b)


# --- guards and validation ---------------------------------------------------

def test_segments_per_width_guard(compound_geometry):
    with pytest.raises(DiscretizationError):
        simulate_spectrum(compound_geometry, BAND, segments_per_width=10)


def test_coupling_step_guard(compound_geometry):
    strong = compound_geometry.with_coupling(4 * compound_geometry.grating2.depth_to_coupling, ("grating2",))
    with pytest.raises(DiscretizationError, match="segments_per_width"):
        simulate_spectrum(strong, BAND)


@pytest.mark.parametrize("grid", [
    np.array([846e-9, 845e-9]),
    np.array([700e-9, 846e-9]),
    np.array([]),
])
def test_grid_validation(compound_geometry, grid):
    with pytest.raises(ValidationError):
        simulate_spectrum(compound_geometry, grid)


def test_geometry_validation():
    g = ApodizedGrating(350e-9, 100, 1e-7, 1e-4, 1e10)
    with pytest.raises(ValidationError, match="period"):
        GratingGeometry(g, dataclasses.replace(g, period=360e-9), gap=0.01)
    with pytest.raises(ValidationError):
        GratingGeometry(g, g, gap=-1.0)
    with pytest.raises(ValidationError):
        ApodizedGrating(350e-9, 0, 1e-7, 1e-4)


# --- stopband, calibration, penetration depth ---------------------------------

def test_find_stopband_interpolates():
    from nfcavity.core import Spectrum
    x = np.arange(10.0)
    t = np.array([1, 1, 0.5, 0.0, 0.0, 0.0, 0.5, 1, 0.0, 1])
    lo, hi = find_stopband(Spectrum(x, t), threshold=0.1)
    assert lo == pytest.approx(2.8) and hi == pytest.approx(5.2)


def test_calibration_reproduces_band(compound_geometry):
    template = lossless(compound_geometry).only("grating1")
    c = calibrate_coupling((845e-9, 848e-9), template, which=("grating1",))
    assert c == pytest.approx(compound_geometry.grating1.depth_to_coupling, rel=1e-6)
    lo, hi = find_stopband(simulate_spectrum(template.with_coupling(c, ("grating1",)), BAND))
    assert hi - lo == pytest.approx(3e-9, rel=1e-3)
    assert (lo + hi) / 2 == pytest.approx(846.5e-9, abs=0.02e-9)


def test_compound_band_width(compound_geometry):
    assert stopband_width(compound_geometry, BAND) == pytest.approx(6e-9, rel=1e-3)


def test_calibration_unreachable(compound_geometry):
    template = lossless(compound_geometry).only("grating1")
    with pytest.raises(CalibrationError):
        calibrate_coupling((826.5e-9, 866.5e-9), template, which=("grating1",))
    with pytest.raises(ValidationError):
        calibrate_coupling((850e-9, 852e-9), template, which=("grating1",))


def test_mode_spacing_shrinks_with_gap(compound_geometry):
    f1 = predicted_mode_spacing(compound_geometry, 847e-9)
    f2 = predicted_mode_spacing(dataclasses.replace(compound_geometry, gap=0.024), 847e-9)
    lp = C_VACUUM / (2 * compound_geometry.group_index(847e-9) * f1) - 0.012
    assert lp > 0
    assert f2 / f1 == pytest.approx((0.012 + lp) / (0.024 + lp), rel=1e-9)


def test_dc_term_creates_red_side_modes(compound_geometry):
    """A crater index decrease traps sharp modes just red of a lone grating's band."""
    base = lossless(compound_geometry).only("grating1")
    for dc, expect in ((0.0, False), (1.5, True)):
        geom = dataclasses.replace(base, dc_ratio=dc)
        lo, hi = find_stopband(simulate_spectrum(geom, np.linspace(838e-9, 851e-9, 4001)))
        lam = np.linspace(hi, hi + 1.2e-9, 60001)
        T = simulate_spectrum(geom, lam).transmission
        pk, _ = find_peaks(T, prominence=0.2)
        assert (pk.size >= 2) == expect
        if expect:
            f = C_VACUUM / lam[pk]
            spacing = abs(f[1] - f[0])
            fwhm = peak_widths(T, pk[:1], 0.5)[0][0] * (lam[1] - lam[0]) * C_VACUUM / lam[pk[0]] ** 2
            assert T[pk[0]] > 0.9
            assert fwhm < spacing / 10
            assert 95.5e9 / 2 < spacing < 2 * 95.5e9
