"""Time the segment-chain kernel: compiled extension versus the numpy fallback.

    python3 benchmarks/bench_chain.py --points 100000 --repeat 3
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from nfcavity import io
from nfcavity.chain import BACKENDS

DATA = Path(__file__).resolve().parent.parent / "data"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--geometry", default=str(DATA / "phcn_compound.geom"))
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--segments-per-width", type=float, default=40.0)
    args = ap.parse_args(argv)

    geom = io.read_geometry(args.geometry)
    lam = np.linspace(843e-9, 850e-9, args.points)
    h, kbar, dc, skew = geom.segments(args.segments_per_width)
    sigma = np.ascontiguousarray(geom.detuning(lam))
    print(f"{args.points} wavelengths x {h.size} segments")

    results = {}
    for name, fn in sorted(BACKENDS.items()):
        best = np.inf
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            out = fn(sigma, h, kbar, dc, skew)
            best = min(best, time.perf_counter() - t0)
        results[name] = out
        print(f"{name:>9}: {best:8.3f} s  ({best / args.points * 1e6:.2f} us per wavelength)")
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        # entries grow to ~1/sqrt(T) inside the stopband, so compare per matrix
        rel = np.max(np.abs(a - b).max(axis=(1, 2)) / np.abs(a).max(axis=(1, 2)))
        print(f"max relative |compiled - python| = {rel:.3g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
