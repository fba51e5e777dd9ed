"""CSV and parameter-file input/output.

All floats are written with 9 significant digits and every file is written
atomically (temporary file in the target directory, then rename).
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .iri import IriSegment
from .models import NAMED_PARAMS, VehicleParams
from .simulate import RoadProfile

DRIVE_COLUMNS = ("t_s", "az_mps2", "ax_mps2", "v_mps", "lat_deg", "lon_deg")
PROFILE_COLUMNS = ("station_m", "elev_left_m", "elev_right_m")
GEO_COLUMNS = ("lat_deg", "lon_deg")
SEGMENT_COLUMNS = ("start_station_m", "end_station_m", "iri_mm_per_m", "lat_deg", "lon_deg", "flags")
MATCH_COLUMNS = ("imu_index", "ref_index", "distance_m", "angle_deg")

NOMINAL_DT = 0.02
DT_TOLERANCE = 0.10


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return ""
    return format(x, ".9g")


def atomic_write(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    atomic_write(path, buf.getvalue())


def _read_table(path, required: Sequence[str], optional: Sequence[str] = ()):
    """Rows of a headed CSV as float columns. Empty optional cells become NaN."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = [c for c in list(required) + list(optional) if c in header]
        idx = [header.index(c) for c in cols]
        data, lines = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for c, i in zip(cols, idx):
                cell = row[i].strip()
                if cell == "" and c in optional:
                    vals.append(np.nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise ValidationError(f"{path}:{line}: column {c}: not a number: {cell!r}") from None
                if not np.isfinite(v):
                    raise ValidationError(f"{path}:{line}: column {c}: non-finite value {cell!r}")
                vals.append(v)
            data.append(vals)
            lines.append(line)
    arr = np.array(data, dtype=float).reshape(len(data), len(cols))
    return {c: arr[:, j] for j, c in enumerate(cols)}, np.array(lines, dtype=int)


# --- drive records -------------------------------------------------------------

@dataclass
class DriveData:
    """Column-wise drive record; ``az`` includes gravity."""

    t: np.ndarray
    az: np.ndarray
    ax: np.ndarray
    v: np.ndarray
    lat: Optional[np.ndarray] = None
    lon: Optional[np.ndarray] = None
    gaps: tuple = ()

    def __len__(self):
        return self.t.shape[0]

    @property
    def dt(self) -> float:
        return float(np.median(np.diff(self.t)))


def ingest_drive(path, nominal_dt: float = NOMINAL_DT) -> DriveData:
    """Read and validate a drive CSV.

    Sample intervals outside ``nominal_dt`` +/- 10% are reported in ``gaps``
    as ``(line, dt)`` pairs; they are not fatal.
    """
    cols, lines = _read_table(path, DRIVE_COLUMNS[:4], GEO_COLUMNS)
    t, v = cols["t_s"], cols["v_mps"]
    if t.size == 0:
        raise ValidationError(f"{path}: no data rows")
    bad = np.flatnonzero(v < 0)
    if bad.size:
        raise ValidationError(f"{path}:{lines[bad[0]]}: negative speed {v[bad[0]]:g}")
    dt = np.diff(t)
    dup = np.flatnonzero(dt == 0)
    if dup.size:
        k = dup[0]
        raise ValidationError(f"{path}: duplicate timestamp {t[k]:g} on lines {lines[k]} and {lines[k + 1]}")
    back = np.flatnonzero(dt < 0)
    if back.size:
        k = back[0]
        raise ValidationError(f"{path}:{lines[k + 1]}: time goes backwards ({t[k + 1]:g} after {t[k]:g})")
    off = np.flatnonzero(np.abs(dt - nominal_dt) > DT_TOLERANCE * nominal_dt)
    gaps = tuple((int(lines[k + 1]), float(dt[k])) for k in off)
    lat = cols.get("lat_deg")
    lon = cols.get("lon_deg")
    if lat is not None and (lon is None or np.all(np.isnan(lat))):
        lat = lon = None
    return DriveData(t, cols["az_mps2"], cols["ax_mps2"], v, lat, lon, gaps)


def write_drive(path, d: DriveData):
    n = len(d)
    lat = d.lat if d.lat is not None else [None] * n
    lon = d.lon if d.lon is not None else [None] * n
    write_rows(path, DRIVE_COLUMNS, zip(d.t, d.az, d.ax, d.v, lat, lon))


# --- profiles ------------------------------------------------------------------

def read_profile(path):
    """Profile CSV as ``(RoadProfile, first_station)``."""
    cols, lines = _read_table(path, PROFILE_COLUMNS[:2], (PROFILE_COLUMNS[2],) + GEO_COLUMNS)
    st = cols["station_m"]
    if st.size < 2:
        raise ValidationError(f"{path}: need at least 2 profile samples")
    ds = np.diff(st)
    if np.any(ds <= 0):
        k = int(np.argmax(ds <= 0))
        raise ValidationError(f"{path}:{lines[k + 1]}: stations must be strictly increasing")
    S = float(np.mean(ds))
    if np.max(np.abs(ds - S)) > 1e-6 * max(S, 1.0):
        raise ValidationError(f"{path}: stations are not uniformly spaced")
    right = cols.get("elev_right_m")
    if right is not None and np.any(np.isnan(right)):
        right = None if np.all(np.isnan(right)) else _fail(f"{path}: elev_right_m partly empty")
    lat, lon = cols.get("lat_deg"), cols.get("lon_deg")
    if lat is None or lon is None or np.any(np.isnan(lat)) or np.any(np.isnan(lon)):
        lat = lon = None
    S = float(format(S, ".9g"))
    return RoadProfile(S, cols["elev_left_m"], right, lat, lon), float(st[0])


def _fail(msg):
    raise ValidationError(msg)


def write_profile(path, p: RoadProfile, station0: float = 0.0):
    left, right = p.tracks()
    st = station0 + p.stations
    if p.has_geotags:
        write_rows(path, PROFILE_COLUMNS + GEO_COLUMNS, zip(st, left, right, p.lat, p.lon))
    else:
        write_rows(path, PROFILE_COLUMNS, zip(st, left, right))


# --- segments ------------------------------------------------------------------

def write_segments(path, segments: Sequence[IriSegment]):
    write_rows(path, SEGMENT_COLUMNS,
               ((s.start, s.end, s.iri, s.lat, s.lon, ";".join(s.flags)) for s in segments))


def read_segments(path) -> List[IriSegment]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in SEGMENT_COLUMNS[:3] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        out = []
        for row in reader:
            try:
                a, b, v = (float(row[c]) for c in SEGMENT_COLUMNS[:3])
                lat = float(row["lat_deg"]) if row.get("lat_deg") else None
                lon = float(row["lon_deg"]) if row.get("lon_deg") else None
            except (TypeError, ValueError):
                raise ValidationError(f"{path}:{reader.line_num}: malformed segment row") from None
            flags = tuple(f for f in (row.get("flags") or "").split(";") if f)
            out.append(IriSegment(a, b, v, 0, lat, lon, flags))
    return out


# --- parameters ----------------------------------------------------------------

PARAM_KEYS = ("m_s", "m_u", "K_s", "C_s", "K_t", "I_s", "l")


def read_params(spec) -> VehicleParams:
    """Vehicle parameters from a named set (``golden``, ``audi``) or a key=value file.

    A file may start from a named set with ``base = <name>`` and override
    individual keys. Lines starting with ``#`` are comments.
    """
    name = os.fspath(spec)
    if name in NAMED_PARAMS:
        return NAMED_PARAMS[name]()
    try:
        with open(name) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"{name}: not a named parameter set ({', '.join(NAMED_PARAMS)}) "
                              f"and cannot be opened ({exc.strerror})") from None
    values, base = {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{name}:{lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key == "base":
            if val not in NAMED_PARAMS:
                raise ValidationError(f"{name}:{lineno}: unknown parameter set {val!r}")
            base = val
            continue
        if key not in PARAM_KEYS:
            raise ValidationError(f"{name}:{lineno}: unknown key {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise ValidationError(f"{name}:{lineno}: {key}: not a number: {val!r}") from None
    merged = NAMED_PARAMS[base]().as_dict() if base else {}
    merged.update(values)
    missing = [k for k in PARAM_KEYS[:5] if merged.get(k) is None]
    if missing:
        raise ValidationError(f"{name}: missing parameter(s) {', '.join(missing)}")
    return VehicleParams(**merged)


def write_params(path, params: VehicleParams, extra: Optional[dict] = None):
    lines = [f"{k} = {fmt(v)}" for k, v in params.as_dict().items() if v is not None]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {fmt(v) if not isinstance(v, str) else v}")
    atomic_write(path, "\n".join(lines) + "\n")
