"""File formats: spectrum CSV, flat key-value geometry/config files, loss tables.

Spectrum CSV::

    # axis=wavelength_m
    8.465e-07,0.0123,0.9877
    ...

One ``# axis=`` header, then ``axis,transmission[,reflection]`` rows, LF line
endings. Geometry and config files are ``key = value`` lines with ``#``
comments and no nesting.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import numpy as np

from .core import AxisKind, Spectrum, ValidationError
from .gratingsim import DEFAULT_BRAGG, ApodizedGrating, GratingGeometry


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt(v: float) -> str:
    """Shortest round-trip decimal for a float."""
    return repr(float(v))


# --- spectrum CSV -----------------------------------------------------------

def format_spectrum(spec: Spectrum) -> str:
    cols = [spec.axis]
    if spec.transmission is not None:
        cols.append(spec.transmission)
    if spec.reflection is not None:
        if spec.transmission is None:
            raise ValidationError("spectrum CSV needs a transmission column")
        cols.append(spec.reflection)
    lines = [f"# axis={spec.axis_kind.value}"]
    lines.extend(",".join(fmt(v) for v in row) for row in zip(*cols))
    return "\n".join(lines) + "\n"


def write_spectrum(path, spec: Spectrum) -> None:
    atomic_write(path, format_spectrum(spec))


def read_spectrum(path) -> Spectrum:
    a, kind = _read_columns(path)
    return Spectrum(a[:, 0], a[:, 1], a[:, 2] if a.shape[1] == 3 else None, kind)


def read_reflection_spectrum(path) -> Spectrum:
    """Reflection-only file: ``axis,reflection`` rows, or the third column of a full file."""
    a, kind = _read_columns(path)
    return Spectrum(a[:, 0], None, a[:, -1], kind)


def _read_columns(path):
    kind = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("axis="):
                    try:
                        kind = AxisKind(body[5:].strip())
                    except ValueError:
                        raise ValidationError(f"{path}:{lineno}: unknown axis kind {body[5:]!r}") from None
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
    if kind is None:
        raise ValidationError(f"{path}: missing '# axis=' header")
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (2, 3):
        raise ValidationError(f"{path}: rows must all have 2 or 3 columns")
    return np.array(rows), kind


# --- key-value files --------------------------------------------------------

def read_kv(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            if not k:
                raise ValidationError(f"{path}:{lineno}: empty key")
            if k in out:
                raise ValidationError(f"{path}:{lineno}: duplicate key {k!r}")
            out[k] = v
    return out


def format_kv(items: Mapping[str, Any], header: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    for k, v in items.items():
        lines.append(f"{k} = {fmt(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


_GRATING_KEYS = ("period", "num_periods", "peak_depth", "profile_width",
                 "depth_to_coupling", "center_offset")
_GEOM_KEYS = ("gap", "n_eff", "bragg_wavelength", "dn_dlambda", "background_loss", "dc_ratio")


def _num(kv, key, path, default=None, cast=float):
    if key not in kv:
        if default is None:
            raise ValidationError(f"{path}: missing key {key!r}")
        return default
    v = kv[key]
    try:
        x = cast(v) if cast is not int else int(float(v))
    except ValueError:
        raise ValidationError(f"{path}: {key} = {v!r} is not a number") from None
    if cast is int and float(v) != x:
        raise ValidationError(f"{path}: {key} must be an integer")
    if cast is float and math.isnan(x):
        raise ValidationError(f"{path}: {key} is NaN")
    return x


def geometry_from_kv(kv: Mapping[str, str], path="<geometry>") -> GratingGeometry:
    allowed = set(_GEOM_KEYS) | {f"grating{i}_{k}" for i in (1, 2) for k in _GRATING_KEYS}
    unknown = sorted(set(kv) - allowed)
    if unknown:
        raise ValidationError(f"{path}: unknown keys {unknown}")
    gratings = []
    for i in (1, 2):
        p = f"grating{i}_"
        gratings.append(ApodizedGrating(
            period=_num(kv, p + "period", path),
            num_periods=_num(kv, p + "num_periods", path, cast=int),
            peak_depth=_num(kv, p + "peak_depth", path),
            profile_width=_num(kv, p + "profile_width", path),
            depth_to_coupling=_num(kv, p + "depth_to_coupling", path, 0.0),
            center_offset=_num(kv, p + "center_offset", path, 0.0),
        ))
    bragg = kv.get("bragg_wavelength", fmt(DEFAULT_BRAGG))
    return GratingGeometry(
        gratings[0], gratings[1],
        gap=_num(kv, "gap", path),
        n_eff=_num(kv, "n_eff", path, 1.2),
        bragg_wavelength=None if bragg.lower() == "none" else _num({"b": bragg}, "b", path),
        dn_dlambda=_num(kv, "dn_dlambda", path, 0.0),
        background_loss=_num(kv, "background_loss", path, 0.0),
        dc_ratio=_num(kv, "dc_ratio", path, 0.0),
    )


def read_geometry(path) -> GratingGeometry:
    return geometry_from_kv(read_kv(path), path)


def geometry_to_kv(geom: GratingGeometry) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k in _GEOM_KEYS:
        v = getattr(geom, k)
        out[k] = "none" if v is None else float(v)
    for i, g in ((1, geom.grating1), (2, geom.grating2)):
        for k in _GRATING_KEYS:
            v = getattr(g, k)
            out[f"grating{i}_{k}"] = v if k == "num_periods" else float(v)
    return out


def write_geometry(path, geom: GratingGeometry, header: Iterable[str] = ()) -> None:
    atomic_write(path, format_kv(geometry_to_kv(geom), header))


# --- loss table -------------------------------------------------------------

def read_loss_table(path):
    """Rows ``kappa_Hz,T0,R0[,weight]``; ``#`` lines are comments."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals = [float(v) for v in line.split(",")]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric field") from None
            if len(vals) not in (3, 4):
                raise ValidationError(f"{path}:{lineno}: expected 3 or 4 columns")
            rows.append(vals)
    if not rows:
        raise ValidationError(f"{path}: empty table")
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{path}: inconsistent column count")
    a = np.array(rows)
    return a[:, 0], a[:, 1], a[:, 2], (a[:, 3] if a.shape[1] == 4 else None)


# --- tables and reports -----------------------------------------------------

def format_table(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return fmt(v)
        return str(v)

    lines = ["# " + ",".join(header)]
    lines.extend(",".join(cell(v) for v in r) for r in rows)
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_report(report: Mapping[str, Any]) -> str:
    return json.dumps(_jsonable(report), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def load_report(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a JSON report ({exc})") from None


def input_record(path) -> dict[str, str]:
    return {"name": Path(path).name, "sha256": sha256_file(path)}


def resolve_config(defaults: Mapping[str, Any], file_values: Optional[Mapping[str, str]],
                   flags: Mapping[str, Any]) -> dict[str, Any]:
    """Layer ``defaults < config file < flags``; values are cast to the default's type."""
    out = dict(defaults)
    for k, v in (file_values or {}).items():
        if k not in defaults:
            continue
        out[k] = _cast_like(defaults[k], v, k)
    for k, v in flags.items():
        if v is not None and k in defaults:
            out[k] = v
    return out


def _cast_like(default, value: str, key: str):
    try:
        if isinstance(default, bool):
            low = value.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float) or default is None:
            return None if value.strip().lower() == "none" else float(value)
    except ValueError:
        raise ValidationError(f"config key {key}: cannot parse {value!r}") from None
    return value
