"""Regenerate the repository fixtures in this directory.

    python3 data/make_fixtures.py            # write everything
    python3 data/make_fixtures.py --check    # recalibrate and compare, write nothing

Geometry: two Gaussian-apodized crater gratings (PhCN1, PhCN2) with a 1.2 cm
gap. PhCN1 is calibrated alone to a 845-848 nm stopband, then PhCN2 so that
the compound stopband is 6 nm wide (844-850 nm span). The background loss
corresponds to an intracavity loss rate of 15 MHz.

Synthetic comb: six cavity modes with FSR 10.36 GHz, loss rate 15 MHz and
symmetric mirrors, linewidths 27 to 170 MHz, built from the cavity amplitude
model. Samples are 1 MHz apart within 600 MHz of each mode and 100 MHz apart
elsewhere; each sample takes the response of its nearest mode.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from nfcavity import io
from nfcavity.core import C_VACUUM, AxisKind, Spectrum
from nfcavity.gratingsim import ApodizedGrating, GratingGeometry, calibrate_coupling
from nfcavity.response import CavityResponseParams, cavity_amplitudes, model_t0_r0

HERE = Path(__file__).resolve().parent

PHCN1_BAND = (845e-9, 848e-9)
COMPOUND_BAND = (844e-9, 850e-9)
GAP = 0.012
KAPPA_S = 15e6
FSR = 10.36e9
KAPPAS = (27e6, 33e6, 41e6, 59e6, 100e6, 170e6)
COMB_START = 354.0e12


def base_geometry(c1: float = 0.0, c2: float = 0.0, background_loss: float = 0.0) -> GratingGeometry:
    g1 = ApodizedGrating(350e-9, 5143, 140e-9, 0.9e-3, depth_to_coupling=c1)
    g2 = ApodizedGrating(350e-9, 9714, 190e-9, 1.7e-3, depth_to_coupling=c2)
    return GratingGeometry(g1, g2, gap=GAP, background_loss=background_loss)


def loss_for_rate(geom: GratingGeometry, kappa_s: float) -> float:
    """Power attenuation [1/m] whose photon decay rate is ``kappa_s`` [Hz] (FWHM)."""
    # amplitude loss alpha/2 per length, photon loss rate alpha * c / n
    return 2.0 * math.pi * geom.index * kappa_s / C_VACUUM


def calibrate() -> tuple[float, float]:
    c1 = calibrate_coupling(PHCN1_BAND, base_geometry().only("grating1"), which=("grating1",))
    c2 = calibrate_coupling(COMPOUND_BAND, base_geometry(c1), which=("grating2",))
    return c1, c2


def compound_geometry(c1: float, c2: float) -> GratingGeometry:
    g = base_geometry(c1, c2)
    return base_geometry(c1, c2, loss_for_rate(g, KAPPA_S))


def synthetic_comb() -> Spectrum:
    centers = COMB_START + FSR * np.arange(len(KAPPAS))
    fine = [c + 1e6 * np.arange(-600, 601) for c in centers]
    coarse = np.arange(centers[0] - 5e9, centers[-1] + 5e9 + 1, 100e6)
    coarse = coarse[np.min(np.abs(coarse[:, None] - centers[None, :]), axis=1) > 600e6]
    f = np.unique(np.concatenate(fine + [coarse]))
    nearest = np.argmin(np.abs(f[:, None] - centers[None, :]), axis=1)
    T = np.empty_like(f)
    R = np.empty_like(f)
    for i, (c, k) in enumerate(zip(centers, KAPPAS)):
        sel = nearest == i
        t, r = cavity_amplitudes(CavityResponseParams.symmetric(k, KAPPA_S), f[sel] - c)
        T[sel] = np.abs(t) ** 2
        R[sel] = np.abs(r) ** 2
    return Spectrum(f, T, R, AxisKind.FREQUENCY)


def loss_table() -> str:
    k = np.array(KAPPAS)
    t0, r0 = model_t0_r0(k, KAPPA_S)
    return io.format_table(["kappa_Hz", "T0", "R0"], zip(k, t0, r0))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="recalibrate and compare only")
    args = ap.parse_args(argv)

    c1, c2 = calibrate()
    print(f"depth_to_coupling: PhCN1 {c1!r}, PhCN2 {c2!r}")
    if args.check:
        shipped = io.read_geometry(HERE / "phcn_compound.geom")
        ok = (math.isclose(shipped.grating1.depth_to_coupling, c1, rel_tol=1e-6)
              and math.isclose(shipped.grating2.depth_to_coupling, c2, rel_tol=1e-6))
        print("match" if ok else "MISMATCH")
        return 0 if ok else 1

    io.write_geometry(HERE / "phcn_compound.geom", compound_geometry(c1, c2),
                      ["PhCN1 + 1.2 cm gap + PhCN2; background loss gives a 15 MHz loss rate",
                       "generated by make_fixtures.py; lengths in m, losses in 1/m"])
    io.write_geometry(HERE / "phcn1_only.geom", base_geometry(c1).only("grating1"),
                      ["PhCN1 alone, stopband about 845-848 nm", "generated by make_fixtures.py"])
    io.write_geometry(HERE / "zero_depth.geom", base_geometry(),
                      ["no coupling: flat unit transmission", "generated by make_fixtures.py"])
    io.write_spectrum(HERE / "synthetic_comb.csv", synthetic_comb())
    io.atomic_write(HERE / "loss_table.csv", loss_table())
    return 0


if __name__ == "__main__":
    sys.exit(main())
