"""International Roughness Index from spatial profiles and from input estimates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import ValidationError
from .models import IRI_SPEED, build_qc, discretize_linear_hold, golden_car_params, rattle_output
from .simulate import RoadProfile

#: Distance after which the Golden-car start-up transient has decayed (about 0.5 s at 80 km/h).
SETTLING_DISTANCE = 11.0

FLAG_TRANSIENT = "transient"
FLAG_PARTIAL = "partial"


@dataclass(frozen=True)
class IriConfig:
    L: float = 40.0
    S: float = 0.1

    def __post_init__(self):
        if not self.L > 0 or not self.S > 0:
            raise ValidationError(f"L and S must be > 0, got L={self.L}, S={self.S}")
        if self.S > self.L:
            raise ValidationError(f"S ({self.S}) must not exceed L ({self.L})")

    @property
    def V(self) -> float:
        return IRI_SPEED

    @property
    def samples_per_segment(self) -> int:
        return int(round(self.L / self.S))


@dataclass(frozen=True)
class IriSegment:
    start: float
    end: float
    iri: float
    n_samples: int
    lat: Optional[float] = None
    lon: Optional[float] = None
    flags: tuple = ()

    @property
    def length(self) -> float:
        return self.end - self.start


def rattle_velocity(elevation, S: float) -> np.ndarray:
    """Golden-car rattle velocity at each profile sample, starting from rest.

    The profile is taken as piecewise linear between samples and the model is
    discretised exactly for that input at ``T = S / V``. Entry 0 is the rest state.
    """
    ss = build_qc(golden_car_params())
    F, g0, g1 = discretize_linear_hold(ss, S / IRI_SPEED)
    c = rattle_output(ss)
    g0, g1 = g0[:, 0], g1[:, 0]
    u = np.asarray(elevation, dtype=float)
    xi = np.zeros(u.shape[0])
    x = np.zeros(4)
    for i in range(1, u.shape[0]):
        x = F @ x + g0 * u[i - 1] + g1 * u[i]
        xi[i] = c @ x
    return xi


def average_tracks(profile: RoadProfile) -> RoadProfile:
    """Sample-by-sample mean of the two wheel tracks."""
    if profile.right is None:
        raise ValidationError("profile has a single track; nothing to average")
    avg = 0.5 * (profile.left + profile.right)
    return RoadProfile(profile.S, avg, None, profile.lat, profile.lon)


def iri_from_profile(profile, cfg: Optional[IriConfig] = None, station0: float = 0.0) -> List[IriSegment]:
    """IRI per ``L``-metre segment of a single-track profile sampled at ``S``.

    Accepts a :class:`RoadProfile` (two-track profiles are averaged first)
    or a plain elevation array. The first segment is flagged as containing
    the start-up transient; a shorter trailing segment is flagged partial.
    """
    cfg = cfg or IriConfig()
    lat = lon = None
    if isinstance(profile, RoadProfile):
        if not np.isclose(profile.S, cfg.S, rtol=1e-9, atol=0):
            raise ValidationError(f"profile spacing {profile.S} differs from S={cfg.S}; resample first")
        if profile.right is not None:
            profile = average_tracks(profile)
        u, lat, lon = profile.left, profile.lat, profile.lon
    else:
        u = np.asarray(profile, dtype=float)
    if u.ndim != 1:
        raise ValidationError("profile must be one-dimensional")
    if not np.all(np.isfinite(u)):
        raise ValidationError("profile contains non-finite values")
    n_seg = cfg.samples_per_segment
    if u.shape[0] < n_seg:
        raise ValidationError(f"profile of {u.shape[0] * cfg.S:g} m is shorter than one segment ({cfg.L:g} m)")

    # m/m -> mm/m
    slope = np.abs(rattle_velocity(u, cfg.S)) / IRI_SPEED * 1000.0
    segments = []
    for a in range(0, u.shape[0], n_seg):
        b = min(a + n_seg, u.shape[0])
        flags = []
        if a * cfg.S < SETTLING_DISTANCE:
            flags.append(FLAG_TRANSIENT)
        if b - a < n_seg:
            flags.append(FLAG_PARTIAL)
        g_lat = g_lon = None
        if lat is not None:
            mid = (a + b - 1) / 2.0
            g_lat = float(np.interp(mid, np.arange(len(lat)), lat))
            g_lon = float(np.interp(mid, np.arange(len(lon)), lon))
        segments.append(IriSegment(station0 + a * cfg.S, station0 + b * cfg.S, float(slope[a:b].mean()),
                                   b - a, g_lat, g_lon, tuple(flags)))
    return segments


def cumulative_distance(t, v) -> np.ndarray:
    """Distance travelled at each sample time for a piecewise-linear speed."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])


def resample_times(t, v, S: float) -> np.ndarray:
    """Times at which the vehicle has travelled ``i * S`` metres, i = 0, 1, ...

    The recursion ``t_i = t_{i-1} + S / v`` is solved exactly for a speed
    that varies linearly between its samples: the distance within a sample
    interval is quadratic in time, so each ``t_i`` is the root of a
    quadratic. At constant speed this reduces to ``t_i = i S / v``.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or t.size < 2:
        raise ValidationError("time and speed must be 1-D arrays of equal length >= 2")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("time stamps must be strictly increasing")
    if not np.all(v > 0):
        k = int(np.argmin(v > 0))
        raise ValidationError(f"speed must be > 0 everywhere (sample {k}: {v[k]})")
    if not S > 0:
        raise ValidationError(f"S must be > 0, got {S}")
    D = cumulative_distance(t, v)
    n = int(np.floor(D[-1] / S * (1 + 1e-12))) + 1
    target = S * np.arange(n)
    k = np.clip(np.searchsorted(D, target, side="right") - 1, 0, t.size - 2)
    h = t[k + 1] - t[k]
    a = 0.5 * (v[k + 1] - v[k]) / h
    rem = target - D[k]
    # a tau^2 + v_k tau - rem = 0, in the cancellation-free form
    tau = 2 * rem / (v[k] + np.sqrt(v[k] ** 2 + 4 * a * rem))
    return np.minimum(t[k] + tau, t[-1])


def spatial_resample(u_t, t_u, t_v, v, S: float, return_times: bool = False):
    """Distance-triggered samples of a time-indexed input estimate.

    ``u_t`` sampled at ``t_u`` (uniform, step T) is linearly interpolated
    at the times the vehicle reaches each multiple of ``S``. Samples past
    the end of the input are dropped. Shape follows ``u_t``: (N,) or (N, m).
    With ``return_times`` the sample times are returned as well.
    """
    u_t = np.asarray(u_t, dtype=float)
    t_u = np.asarray(t_u, dtype=float)
    if u_t.shape[0] != t_u.shape[0]:
        raise ValidationError("input and time stamps differ in length")
    ti = resample_times(t_v, v, S)
    ti = ti[(ti >= t_u[0]) & (ti <= t_u[-1] + 1e-12)]
    if u_t.ndim == 1:
        out = np.interp(ti, t_u, u_t)
    else:
        out = np.column_stack([np.interp(ti, t_u, u_t[:, j]) for j in range(u_t.shape[1])])
    return (out, ti) if return_times else out


def iri_from_estimates(estimates, t_v, v, cfg: Optional[IriConfig] = None,
                       calibration: float = 1.0, station0: float = 0.0,
                       lat=None, lon=None) -> List[IriSegment]:
    """Resample the nominal input estimate in space, compute IRI, apply a calibration slope.

    ``estimates`` is the result of :func:`roadrough.kalman.run_filter`;
    speed is given as samples ``v`` at times ``t_v``, as are the optional
    positions ``lat``, ``lon`` used to geotag the segments.
    """
    cfg = cfg or IriConfig()
    if not calibration > 0:
        raise ValidationError(f"calibration slope must be > 0, got {calibration}")
    u, ti = spatial_resample(estimates.nominal_profile(), estimates.t, t_v, v, cfg.S, return_times=True)
    if lat is not None and lon is not None:
        u = RoadProfile(cfg.S, u, None, np.interp(ti, t_v, lat), np.interp(ti, t_v, lon))
    segs = iri_from_profile(u, cfg, station0)
    if calibration == 1.0:
        return segs
    return [IriSegment(s.start, s.end, s.iri * calibration, s.n_samples, s.lat, s.lon, s.flags) for s in segs]
