import math

import numpy as np
import pytest

from nfcavity.core import (
    C_VACUUM,
    AxisKind,
    Spectrum,
    ValidationError,
    angular,
    check_index,
    optical_length,
    wavelength_to_frequency,
)


def test_angular_is_two_pi():
    assert angular(1.0) == 2 * math.pi
    with pytest.raises(ValidationError):
        angular(float("nan"))


def test_optical_length_vacuum_identity_and_bounds():
    assert optical_length(0.012, 1.0) == 0.012
    assert optical_length(0.012, 1.2) == pytest.approx(0.0144, rel=1e-15)
    for bad in (1.5, 0.9, 2.0):
        with pytest.raises(ValidationError):
            optical_length(0.01, bad)
    with pytest.raises(ValidationError):
        optical_length(0.0, 1.2)
    with pytest.raises(ValidationError):
        check_index(1.0)


def test_wavelength_frequency_round_trip():
    lam = np.array([844e-9, 846.5e-9, 850e-9])
    f = wavelength_to_frequency(lam)
    assert np.allclose(C_VACUUM / f, lam, rtol=1e-15)


def test_spectrum_is_read_only():
    s = Spectrum([1.0, 2.0, 3.0], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        s.transmission[0] = 1.0
    with pytest.raises(AttributeError):
        s.axis = np.zeros(3)


@pytest.mark.parametrize("axis,t,r,msg", [
    ([1.0], [0.1], None, "2 samples"),
    ([1.0, 1.0], [0.1, 0.1], None, "increasing"),
    ([2.0, 1.0], [0.1, 0.1], None, "increasing"),
    ([1.0, 2.0], None, None, "neither"),
    ([1.0, 2.0], [0.1, -0.1], None, "negative"),
    ([1.0, 2.0], [0.1, 1.2], None, "exceeds"),
    ([1.0, 2.0], [0.1, np.nan], None, "non-finite"),
    ([1.0, np.inf], [0.1, 0.1], None, "non-finite"),
    ([1.0, 2.0, 3.0], [0.1, 0.1], None, "length"),
])
def test_spectrum_validation(axis, t, r, msg):
    with pytest.raises(ValidationError, match=msg):
        Spectrum(axis, t, r)


def test_spectrum_tolerates_small_overshoot():
    Spectrum([1.0, 2.0], [1.0, 1.04])


def test_axis_conversion_reverses_order():
    lam = np.linspace(845e-9, 848e-9, 7)
    t = np.linspace(0.0, 0.6, 7)
    s = Spectrum(lam, t, 1 - t, AxisKind.WAVELENGTH)
    f = s.to_frequency()
    assert f.axis_kind is AxisKind.FREQUENCY
    assert np.all(np.diff(f.axis) > 0)
    assert np.array_equal(f.transmission, t[::-1])
    back = f.to_wavelength()
    assert np.allclose(back.axis, lam, rtol=1e-15)
    assert np.array_equal(back.reflection, 1 - t)
    assert f.to_frequency() is f


def test_channel_and_slice():
    s = Spectrum([1.0, 2.0, 3.0, 4.0], [0.1, 0.2, 0.3, 0.4])
    assert len(s.slice(1, 3)) == 2
    with pytest.raises(ValidationError, match="reflection"):
        s.channel("reflection")
