"""Command-line interface.

Subcommands: ``simulate``, ``analyze``, ``fitloss``, ``qed``, ``version``.
Settings resolve as defaults < config file (``--config`` or ``$NFCAVITY_CONFIG``)
< command-line flags, and the resolved set is written into every report.

Exit codes: 0 success, 2 input/validation error, 3 numerical guard, 4 internal error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from . import io
from .chain import BACKEND
from .core import C_VACUUM, ValidationError, optical_length
from .gratingsim import CalibrationError, DiscretizationError, find_stopband, simulate_spectrum
from .qed import PRESETS, EmitterParams, preset, sweep_figure4
from .response import extract_loss_rate, model_t0_r0, one_pass_transmission, one_pass_uncertainty
from .specfit import FitError, build_mode_table, fsr_to_length

CONFIG_ENV = "NFCAVITY_CONFIG"

EXIT_OK, EXIT_INPUT, EXIT_GUARD, EXIT_INTERNAL = 0, 2, 3, 4

SIMULATE_DEFAULTS = {"segments_per_width": 40.0, "workers": 1, "axis": "wavelength", "threshold": 0.1}
ANALYZE_DEFAULTS = {"min_prominence": 0.05, "min_spacing": 0.0, "window_fwhm": 20.0,
                    "log_detect": False, "n_eff": 1.2}
FITLOSS_DEFAULTS = {"fsr": None}
QED_DEFAULTS = {"preset": "cs-200nm", "eta": None, "gamma0": None, "gamma": None,
                "c_threshold": 1.0, "n_eff": 1.2}
_ALL_KEYS = set(SIMULATE_DEFAULTS) | set(ANALYZE_DEFAULTS) | set(FITLOSS_DEFAULTS) | set(QED_DEFAULTS)


class GuardError(RuntimeError):
    """Numerical guard tripped (exit code 3)."""


def _config_file(args) -> Optional[dict[str, str]]:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        return None
    kv = io.read_kv(path)
    unknown = sorted(set(kv) - _ALL_KEYS)
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {unknown}")
    return kv


def _resolve(args, defaults, **flags) -> dict[str, Any]:
    return io.resolve_config(defaults, _config_file(args), flags)


def _header(command: str, config: dict) -> dict[str, Any]:
    return {"tool": "nfcavity", "version": __version__, "command": command,
            "backend": BACKEND, "config": dict(sorted(config.items()))}


# --- simulate ---------------------------------------------------------------

def _grid(args, axis: str) -> np.ndarray:
    lo, hi = args.start, args.stop
    if not (0 < lo < hi):
        raise ValidationError("need 0 < --start < --stop (wavelengths in m)")
    if (args.step is None) == (args.points is None):
        raise ValidationError("give exactly one of --step or --points")
    if axis == "wavelength":
        if args.points is not None:
            return np.linspace(lo, hi, args.points)
        n = int(math.floor((hi - lo) / args.step + 1e-9)) + 1
        return lo + args.step * np.arange(n)
    if axis == "frequency":
        f_lo, f_hi = C_VACUUM / hi, C_VACUUM / lo
        if args.points is not None:
            f = np.linspace(f_lo, f_hi, args.points)
        else:
            n = int(math.floor((f_hi - f_lo) / args.step + 1e-9)) + 1
            f = f_lo + args.step * np.arange(n)
        return np.sort(C_VACUUM / f)
    raise ValidationError(f"axis must be 'wavelength' or 'frequency', got {axis!r}")


def cmd_simulate(args) -> int:
    cfg = _resolve(args, SIMULATE_DEFAULTS, segments_per_width=args.segments_per_width,
                   workers=args.workers, axis=args.axis, threshold=args.threshold)
    geom = io.read_geometry(args.geometry)
    lam = _grid(args, cfg["axis"])
    if lam.size < 2:
        raise ValidationError("grid has fewer than 2 points")
    try:
        spec = simulate_spectrum(geom, lam, segments_per_width=cfg["segments_per_width"],
                                 workers=int(cfg["workers"]))
    except DiscretizationError as exc:
        raise GuardError(str(exc)) from exc
    if cfg["axis"] == "frequency":
        spec = spec.to_frequency()
    io.write_spectrum(args.output, spec)

    try:
        lo, hi = find_stopband(spec.to_wavelength(), cfg["threshold"])
        band = f"stopband (T < {cfg['threshold']}): {lo * 1e9:.4f} nm to {hi * 1e9:.4f} nm, width {(hi - lo) * 1e9:.4f} nm"
    except ValidationError:
        band = f"no stopband: no sample with T < {cfg['threshold']}"
    print(f"wrote {len(spec)} samples to {args.output}")
    print(band)
    print(f"min T = {spec.transmission.min():.6g}, max R = {spec.reflection.max():.6g}")
    return EXIT_OK


# --- analyze ----------------------------------------------------------------

def _mode_rows(table):
    rows = []
    for i, m in enumerate(table.modes):
        t, r = m.transmission, m.reflection
        rows.append({
            "index": i,
            "center_Hz": m.center,
            "fwhm_Hz": m.fwhm,
            "fwhm_err_Hz": None if t is None else float(t.errors[1]),
            "finesse": m.finesse,
            "T0": m.T0,
            "T0_excess": m.T0_excess,
            "R0": m.R0,
            "R0_depth": m.R0_depth,
            "transmission_converged": None if t is None else t.converged,
            "transmission_rms": None if t is None else t.residual_rms,
            "reflection_ok": m.reflection_ok,
            "reflection_rms": None if r is None else r.residual_rms,
            "note": m.note,
        })
    return rows


def analyze_spectra(spec, reflection, cfg) -> tuple[dict, Any, Any]:
    table = build_mode_table(spec, reflection, min_prominence=cfg["min_prominence"],
                             min_spacing=cfg["min_spacing"], window_fwhm=cfg["window_fwhm"],
                             log_detect=cfg["log_detect"])
    notes = list(table.notes)
    out: dict[str, Any] = {
        "units": {"frequency": "Hz", "length": "m", "power": "normalized"},
        "mode_table": {"fsr_Hz": table.fsr, "fsr_err_Hz": table.fsr_err, "modes": _mode_rows(table)},
        "cavity_length_m": None,
        "optical_length_m": None,
        "loss_budget": None,
        "one_pass_transmission": None,
        "one_pass_transmission_err": None,
    }
    if table.fsr is not None:
        out["cavity_length_m"] = fsr_to_length(table.fsr, cfg["n_eff"])
        out["optical_length_m"] = C_VACUUM / (2.0 * table.fsr)
    else:
        notes.append("warning: fewer than 2 modes, FSR and finesse unavailable")

    has_r = reflection is not None or spec.reflection is not None
    budget = None
    if not has_r:
        notes.append("loss extraction skipped: no reflection data")
    else:
        pts = table.loss_points()
        if len(pts) < 2:
            notes.append(f"loss extraction skipped: {len(pts)} mode(s) with usable T and R fits")
        else:
            k, t0, r0 = (np.array(v) for v in zip(*pts))
            budget = extract_loss_rate(k, t0, r0)
            out["loss_budget"] = _budget_dict(budget)
            if table.fsr is not None:
                try:
                    out["one_pass_transmission"] = one_pass_transmission(budget.kappa_s, table.fsr)
                    out["one_pass_transmission_err"] = one_pass_uncertainty(
                        budget.kappa_s, budget.kappa_s_err, table.fsr, table.fsr_err or 0.0)
                except ValidationError as exc:
                    notes.append(f"one-pass transmission unavailable: {exc}")
    out["notes"] = notes
    return out, table, budget


def _budget_dict(b) -> dict:
    return {
        "kappa_s_Hz": b.kappa_s,
        "kappa_s_err_Hz": b.kappa_s_err,
        "crossing_kappa_Hz": b.crossing_kappa,
        "kappa_c_Hz": list(b.kappa_c),
        "per_point_kappa_s_Hz": list(b.per_point_kappa_s),
        "residual_rms": b.residual_rms,
        "converged": b.converged,
        "at_boundary": b.at_boundary,
        "bootstrap_err_Hz": b.bootstrap_err,
        "notes": list(b.notes),
    }


def _loss_curve_csv(budget, kappa) -> str:
    grid = np.linspace(max(budget.kappa_s, 1e-3 * kappa.max()) * 1.0001, kappa.max() * 1.2, 200)
    t0, r0 = model_t0_r0(grid, budget.kappa_s)
    return io.format_table(["kappa_Hz", "T0_model", "R0_model"], zip(grid, t0, r0))


def cmd_analyze(args) -> int:
    cfg = _resolve(args, ANALYZE_DEFAULTS, min_prominence=args.min_prominence,
                   min_spacing=args.min_spacing, window_fwhm=args.window_fwhm,
                   log_detect=True if args.log_detect else None, n_eff=args.n_eff)
    spec = io.read_spectrum(args.spectrum)
    refl = io.read_reflection_spectrum(args.reflection) if args.reflection else None
    inputs = [io.input_record(args.spectrum)] + ([io.input_record(args.reflection)] if args.reflection else [])
    body, table, budget = analyze_spectra(spec, refl, cfg)
    report = _header("analyze", cfg)
    report["inputs"] = inputs
    report.update(body)
    io.atomic_write(args.output, io.dump_report(report))

    if args.plot_dir:
        d = Path(args.plot_dir)
        rows = body["mode_table"]["modes"]
        cols = ["center_Hz", "fwhm_Hz", "finesse", "T0", "R0"]
        io.atomic_write(d / "mode_table.csv", io.format_table(cols, ([r[c] for c in cols] for r in rows)))
        if budget is not None:
            pts = table.loss_points()
            io.atomic_write(d / "loss_fit.csv", _loss_curve_csv(budget, np.array([p[0] for p in pts])))
            io.atomic_write(d / "loss_points.csv", io.format_table(["kappa_Hz", "T0", "R0"], pts))

    print(f"{len(table.modes)} mode(s); FSR = "
          + ("n/a" if table.fsr is None else f"{table.fsr / 1e9:.4f} GHz"))
    for n in body["notes"]:
        print(n, file=sys.stderr if n.startswith("warning") else sys.stdout)
    if budget is not None:
        print(f"kappa_s = {budget.kappa_s / 1e6:.3f} +- {budget.kappa_s_err / 1e6:.3f} MHz")
    if body["one_pass_transmission"] is not None:
        print(f"one-pass transmission = {body['one_pass_transmission']:.5f}"
              f" +- {body['one_pass_transmission_err']:.5f}")
    return EXIT_OK


# --- fitloss ----------------------------------------------------------------

def cmd_fitloss(args) -> int:
    cfg = _resolve(args, FITLOSS_DEFAULTS, fsr=args.fsr)
    k, t0, r0, w = io.read_loss_table(args.table)
    budget = extract_loss_rate(k, t0, r0, w, bootstrap=args.bootstrap)
    report = _header("fitloss", cfg)
    report["inputs"] = [io.input_record(args.table)]
    report["units"] = {"rate": "Hz"}
    report["loss_budget"] = _budget_dict(budget)
    report["one_pass_transmission"] = None
    report["one_pass_transmission_err"] = None
    if cfg["fsr"] is not None:
        report["one_pass_transmission"] = one_pass_transmission(budget.kappa_s, cfg["fsr"])
        report["one_pass_transmission_err"] = one_pass_uncertainty(budget.kappa_s, budget.kappa_s_err, cfg["fsr"])
    io.atomic_write(args.output, io.dump_report(report))
    if args.plot_dir:
        io.atomic_write(Path(args.plot_dir) / "loss_fit.csv", _loss_curve_csv(budget, k))
    print(f"kappa_s = {budget.kappa_s / 1e6:.4f} +- {budget.kappa_s_err / 1e6:.4f} MHz; "
          f"T0 = R0 at kappa = {budget.crossing_kappa / 1e6:.4f} MHz")
    if report["one_pass_transmission"] is not None:
        print(f"one-pass transmission = {report['one_pass_transmission']:.5f}")
    return EXIT_OK


# --- qed --------------------------------------------------------------------

def _emitter(cfg) -> EmitterParams:
    base = preset(cfg["preset"])
    g0 = base.gamma0 if cfg["gamma0"] is None else cfg["gamma0"]
    # gamma follows gamma0 unless given
    g = (g0 if base.gamma == base.gamma0 else base.gamma) if cfg["gamma"] is None else cfg["gamma"]
    eta = base.eta if cfg["eta"] is None else cfg["eta"]
    return EmitterParams(g0, g, eta)


def cmd_qed(args) -> int:
    cfg = _resolve(args, QED_DEFAULTS, preset=args.preset, eta=args.eta, gamma0=args.gamma0,
                   gamma=args.gamma, c_threshold=args.c_threshold, n_eff=args.n_eff)
    emitter = _emitter(cfg)
    inputs = []
    if args.report:
        if args.finesse or args.length or args.optical_length:
            raise ValidationError("--report excludes --finesse/--length/--optical-length")
        rep = io.load_report(args.report)
        inputs.append(io.input_record(args.report))
        try:
            mt = rep["mode_table"]
            fsr = mt["fsr_Hz"]
            fin = [m["finesse"] for m in mt["modes"] if m.get("finesse")]
        except (KeyError, TypeError):
            raise ValidationError(f"{args.report}: not an analyze report") from None
        if not fsr or not fin:
            raise ValidationError(f"{args.report}: report has no FSR or fitted finesse values")
        L = C_VACUUM / (2.0 * fsr)
    else:
        if not args.finesse:
            raise ValidationError("give --report or --finesse")
        try:
            fin = [float(v) for v in args.finesse.split(",")]
        except ValueError:
            raise ValidationError(f"bad --finesse list {args.finesse!r}") from None
        if (args.length is None) == (args.optical_length is None):
            raise ValidationError("give exactly one of --length or --optical-length")
        if args.optical_length is not None:
            L = args.optical_length
        else:
            L = optical_length(args.length, cfg["n_eff"])
    points = sweep_figure4(emitter, L, fin, cfg["c_threshold"])

    cols = ["finesse", "kappa_Hz", "rabi2g0_Hz", "cooperativity", "cooperativity_exact", "regime"]
    rows = [[p.finesse, p.kappa, p.rabi2g0, p.cooperativity, p.cooperativity_exact, p.regime.value]
            for p in points]
    if args.output:
        report = _header("qed", cfg)
        report["inputs"] = inputs
        report["units"] = {"rate": "Hz", "length": "m"}
        report["emitter"] = {"gamma0_Hz": emitter.gamma0, "gamma_Hz": emitter.gamma, "eta": emitter.eta}
        report["optical_length_m"] = L
        report["points"] = [dict(zip(cols, r)) for r in rows]
        io.atomic_write(args.output, io.dump_report(report))
    if args.table:
        io.atomic_write(args.table, io.format_table(cols, rows))
    print(f"{'F':>9} {'kappa/MHz':>10} {'2g0/MHz':>9} {'C':>8}  regime")
    for p in points:
        print(f"{p.finesse:9.2f} {p.kappa / 1e6:10.3f} {p.rabi2g0 / 1e6:9.3f} {p.cooperativity:8.3f}  {p.regime.value}")
    return EXIT_OK


def cmd_version(args) -> int:
    print(f"nfcavity {__version__} (kernel backend: {BACKEND})")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfcavity", description="Simulate and analyze nanofiber Bragg-grating cavities.",
                                allow_abbrev=False)
    p.add_argument("--config", help=f"flat key = value config file (default ${CONFIG_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="forward-simulate a grating geometry", allow_abbrev=False)
    s.add_argument("--geometry", required=True)
    s.add_argument("--start", type=float, required=True, help="first wavelength [m]")
    s.add_argument("--stop", type=float, required=True, help="last wavelength [m]")
    s.add_argument("--step", type=float, help="grid step [m, or Hz with --axis frequency]")
    s.add_argument("--points", type=int)
    s.add_argument("--axis", choices=["wavelength", "frequency"])
    s.add_argument("--segments-per-width", type=float)
    s.add_argument("--workers", type=int)
    s.add_argument("--threshold", type=float, help="stopband transmission threshold")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="mode table, FSR, finesse and loss budget", allow_abbrev=False)
    a.add_argument("--spectrum", required=True)
    a.add_argument("--reflection", help="separate reflection spectrum on the same axis")
    a.add_argument("--min-prominence", type=float)
    a.add_argument("--min-spacing", type=float, help="[axis units of the frequency axis, Hz]")
    a.add_argument("--window-fwhm", type=float)
    a.add_argument("--log-detect", action="store_true", help="detect resonances on log10(T)")
    a.add_argument("--n-eff", type=float)
    a.add_argument("--output", required=True)
    a.add_argument("--plot-dir")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("fitloss", help="fit kappa_s to a (kappa, T0, R0) table", allow_abbrev=False)
    f.add_argument("--table", required=True)
    f.add_argument("--fsr", type=float, help="[Hz] for the one-pass transmission")
    f.add_argument("--bootstrap", type=int, default=0)
    f.add_argument("--output", required=True)
    f.add_argument("--plot-dir")
    f.set_defaults(func=cmd_fitloss)

    q = sub.add_parser("qed", help="Rabi frequency, cooperativity and regime", allow_abbrev=False)
    q.add_argument("--report", help="analyze report supplying FSR and finesse")
    q.add_argument("--finesse", help="comma-separated finesse values")
    q.add_argument("--length", type=float, help="geometric cavity length [m]")
    q.add_argument("--optical-length", type=float, help="optical cavity length [m]")
    q.add_argument("--n-eff", type=float)
    q.add_argument("--preset", help=f"one of {sorted(PRESETS)}")
    q.add_argument("--eta", type=float)
    q.add_argument("--gamma0", type=float, help="[Hz]")
    q.add_argument("--gamma", type=float, help="[Hz]")
    q.add_argument("--c-threshold", type=float)
    q.add_argument("--output", help="JSON report path")
    q.add_argument("--table", help="CSV table path")
    q.set_defaults(func=cmd_qed)

    v = sub.add_parser("version", help="print version")
    v.set_defaults(func=cmd_version)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GuardError, DiscretizationError, CalibrationError, FitError) as exc:
        print(f"error: numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
