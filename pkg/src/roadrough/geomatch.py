"""Position matching of two geotagged traces with distance and heading gates."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError

EARTH_RADIUS = 6371008.8


@dataclass(frozen=True)
class MatchConfig:
    d_max: float = 4.0
    phi_max: float = 45.0

    def __post_init__(self):
        if not self.d_max > 0:
            raise ValidationError(f"d_max must be > 0, got {self.d_max}")
        if not 0 < self.phi_max < 180:
            raise ValidationError(f"phi_max must be in (0, 180), got {self.phi_max}")


@dataclass
class MatchResult:
    """Per-IMU-sample match. ``ref_index`` is -1 where no match was accepted.

    ``distance`` and ``angle`` always describe the nearest reference point,
    matched or not.
    """

    ref_index: np.ndarray
    distance: np.ndarray
    angle: np.ndarray

    @property
    def matched(self) -> np.ndarray:
        return self.ref_index >= 0

    def __len__(self):
        return self.ref_index.shape[0]


def _check_coords(lat, lon):
    lat = np.atleast_1d(np.asarray(lat, dtype=float))
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    if lat.shape != lon.shape or lat.ndim != 1:
        raise ValidationError("lat and lon must be 1-D arrays of equal length")
    if lat.size == 0:
        raise ValidationError("trace is empty")
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise ValidationError("coordinates must be finite")
    if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
        raise ValidationError("latitude must be in [-90, 90] and longitude in [-180, 180]")
    return lat, lon


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular projection to metres about ``(lat0, lon0)``."""

    lat0: float
    lon0: float

    @classmethod
    def about(cls, *traces) -> "LocalProjection":
        lats = np.concatenate([np.asarray(t[0], dtype=float) for t in traces])
        lons = np.concatenate([np.asarray(t[1], dtype=float) for t in traces])
        return cls(float(lats.mean()), float(lons.mean()))

    def forward(self, lat, lon):
        k = np.deg2rad(1.0) * EARTH_RADIUS
        x = (np.asarray(lon) - self.lon0) * k * np.cos(np.deg2rad(self.lat0))
        y = (np.asarray(lat) - self.lat0) * k
        return np.column_stack([x, y])

    def inverse(self, xy):
        xy = np.atleast_2d(xy)
        k = np.deg2rad(1.0) * EARTH_RADIUS
        lat = self.lat0 + xy[:, 1] / k
        lon = self.lon0 + xy[:, 0] / (k * np.cos(np.deg2rad(self.lat0)))
        return lat, lon


def offset_positions(origin, stations, heading_deg: float = 90.0):
    """Geotags for points ``stations`` metres along a straight line from ``origin``."""
    lat0, lon0 = origin
    _check_coords([lat0], [lon0])
    proj = LocalProjection(float(lat0), float(lon0))
    h = np.deg2rad(heading_deg)
    s = np.asarray(stations, dtype=float)
    return proj.inverse(np.column_stack([s * np.sin(h), s * np.cos(h)]))


def _headings_xy(xy: np.ndarray) -> np.ndarray:
    n = xy.shape[0]
    if n < 2:
        raise ValidationError("headings need at least 2 points")
    d = np.empty_like(xy)
    d[1:-1] = xy[2:] - xy[:-2]
    d[0] = xy[1] - xy[0]
    d[-1] = xy[-1] - xy[-2]
    # central difference may cancel at a stop; fall back to the forward step
    zero = np.hypot(d[:, 0], d[:, 1]) == 0
    if np.any(zero[1:-1]):
        fwd = np.vstack([xy[1:] - xy[:-1], np.zeros((1, 2))])
        idx = np.flatnonzero(zero[1:-1]) + 1
        d[idx] = fwd[idx]
        zero = np.hypot(d[:, 0], d[:, 1]) == 0
    hd = np.mod(np.rad2deg(np.arctan2(d[:, 0], d[:, 1])), 360.0)
    hd[zero] = np.nan
    # carry the last defined heading forward, then fill a leading gap backwards
    valid = ~np.isnan(hd)
    if not valid.any():
        return hd
    idx = np.where(valid, np.arange(n), 0)
    np.maximum.accumulate(idx, out=idx)
    hd = hd[idx]
    first = int(np.argmax(valid))
    hd[:first] = hd[first]
    return hd


def headings(lat, lon) -> np.ndarray:
    """Compass heading (degrees, 0 = north, 90 = east) of a trace at each point.

    A fully degenerate trace (all points identical) yields NaN everywhere.
    """
    lat, lon = _check_coords(lat, lon)
    proj = LocalProjection.about((lat, lon))
    return _headings_xy(proj.forward(lat, lon))


def angle_difference(a, b) -> np.ndarray:
    """Absolute heading difference wrapped to [0, 180]."""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), 360.0))
    return np.minimum(d, 360.0 - d)


class GridIndex:
    """Uniform-grid spatial hash for nearest-point queries in the plane."""

    def __init__(self, xy: np.ndarray, cell: float):
        if not cell > 0:
            raise ValidationError("cell size must be > 0")
        self.xy = np.asarray(xy, dtype=float)
        self.cell = float(cell)
        self._cells = defaultdict(list)
        keys = np.floor(self.xy / self.cell).astype(np.int64)
        for i, (cx, cy) in enumerate(keys):
            self._cells[(int(cx), int(cy))].append(i)
        self._cells = {k: np.asarray(v) for k, v in self._cells.items()}
        self._keys = np.array(list(self._cells.keys()), dtype=np.int64).reshape(-1, 2)

    def nearest(self, p) -> tuple:
        """Index and distance of the nearest point; ties go to the lowest index."""
        cx, cy = (int(v) for v in np.floor(np.asarray(p) / self.cell))
        ring = 0
        best_i, best_d = -1, np.inf
        max_ring = self._max_ring(cx, cy)
        while ring <= max_ring:
            for key in self._ring_keys(cx, cy, ring):
                idx = self._cells.get(key)
                if idx is None:
                    continue
                d = np.hypot(self.xy[idx, 0] - p[0], self.xy[idx, 1] - p[1])
                j = int(np.argmin(d))
                if d[j] < best_d or (d[j] == best_d and idx[j] < best_i):
                    best_i, best_d = int(idx[j]), float(d[j])
            # anything in ring r+1 or beyond is at least r * cell away
            if best_d <= ring * self.cell:
                break
            ring += 1
        return best_i, best_d

    def _max_ring(self, cx, cy) -> int:
        return int(np.max(np.abs(self._keys - [cx, cy]))) if len(self._keys) else 0

    @staticmethod
    def _ring_keys(cx, cy, r):
        if r == 0:
            yield (cx, cy)
            return
        for dx in range(-r, r + 1):
            yield (cx + dx, cy - r)
            yield (cx + dx, cy + r)
        for dy in range(-r + 1, r):
            yield (cx - r, cy + dy)
            yield (cx + r, cy + dy)


def match(imu_lat, imu_lon, ref_lat, ref_lon, cfg: Optional[MatchConfig] = None) -> MatchResult:
    """Link every IMU sample to its nearest reference sample if both gates pass.

    Only the single nearest reference point is considered; it is accepted
    when its distance is below ``d_max`` and the heading difference is below
    ``phi_max`` (both strict).
    """
    cfg = cfg or MatchConfig()
    imu_lat, imu_lon = _check_coords(imu_lat, imu_lon)
    ref_lat, ref_lon = _check_coords(ref_lat, ref_lon)
    proj = LocalProjection.about((imu_lat, imu_lon), (ref_lat, ref_lon))
    imu_xy = proj.forward(imu_lat, imu_lon)
    ref_xy = proj.forward(ref_lat, ref_lon)
    h_imu = _headings_xy(imu_xy) if len(imu_xy) > 1 else np.full(1, np.nan)
    h_ref = _headings_xy(ref_xy) if len(ref_xy) > 1 else np.full(1, np.nan)

    index = GridIndex(ref_xy, cfg.d_max)
    n = imu_xy.shape[0]
    nearest = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for i in range(n):
        nearest[i], dist[i] = index.nearest(imu_xy[i])
    angle = angle_difference(h_imu, h_ref[nearest])
    # undefined headings (NaN) compare False and never match
    ok = (dist < cfg.d_max) & (angle < cfg.phi_max)
    return MatchResult(np.where(ok, nearest, -1), dist, angle)
