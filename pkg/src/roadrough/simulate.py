"""Synthetic road profiles and forward simulation of vehicle responses."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import signal
from scipy.optimize import brentq

from .errors import ValidationError
from .models import StateSpace, VehicleParams, build_hc, build_qc, equilibrium_state

#: ISO 8608 displacement PSD at n0 = 0.1 cycles/m (geometric class means), m^3.
ISO_CLASSES = {"A": 16e-6, "B": 64e-6, "C": 256e-6, "D": 1024e-6, "E": 4096e-6}
ISO_N0 = 0.1
ISO_BAND = (0.011, 2.83)


@dataclass(frozen=True)
class RoadProfile:
    """Elevation tracks sampled every ``S`` metres from station 0.

    A single-track profile has ``right=None`` and is duplicated on demand.
    """

    S: float
    left: np.ndarray
    right: Optional[np.ndarray] = None
    lat: Optional[np.ndarray] = None
    lon: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.S > 0:
            raise ValidationError(f"profile spacing must be > 0, got {self.S}")
        left = np.asarray(self.left, dtype=float)
        object.__setattr__(self, "left", left)
        if self.right is not None:
            right = np.asarray(self.right, dtype=float)
            if right.shape != left.shape:
                raise ValidationError("left and right tracks must have equal length")
            object.__setattr__(self, "right", right)
        for name in ("lat", "lon"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != left.shape:
                    raise ValidationError(f"{name} must match the track length")
                object.__setattr__(self, name, v)

    def __len__(self):
        return self.left.shape[0]

    @property
    def stations(self) -> np.ndarray:
        return self.S * np.arange(len(self))

    @property
    def length(self) -> float:
        return self.S * (len(self) - 1)

    @property
    def has_geotags(self) -> bool:
        return self.lat is not None and self.lon is not None

    def tracks(self):
        right = self.left if self.right is None else self.right
        return self.left, right


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-linear speed through knots ``(t, v)``; held constant outside."""

    t: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if t.shape != v.shape or t.size == 0:
            raise ValidationError("speed knots need matching, non-empty t and v")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("speed knot times must be strictly increasing")
        if np.any(v <= 0):
            raise ValidationError("speed must be > 0 everywhere")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        seg = 0.5 * (v[1:] + v[:-1]) * np.diff(t)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))

    @classmethod
    def constant(cls, v: float) -> "SpeedProfile":
        return cls([0.0], [v])

    @classmethod
    def piecewise(cls, levels: Sequence[float], durations: Sequence[float], ramp: float = 1.0):
        """Constant levels held for given durations, joined by linear ramps."""
        ts, vs, t = [], [], 0.0
        for i, (v, d) in enumerate(zip(levels, durations)):
            if i > 0:
                t += ramp
            ts += [t, t + d]
            vs += [v, v]
            t += d
        return cls(ts, vs)

    def at(self, t):
        return np.interp(t, self.t, self.v)

    def _integral(self, t):
        # antiderivative of v anchored at the first knot
        t = np.asarray(t, dtype=float)
        tk, vk = self.t, self.v
        before = vk[0] * np.minimum(t - tk[0], 0.0)
        after = vk[-1] * np.maximum(t - tk[-1], 0.0)
        tc = np.clip(t, tk[0], tk[-1])
        if len(tk) == 1:
            return before + after
        idx = np.clip(np.searchsorted(tk, tc, side="right") - 1, 0, len(tk) - 2)
        slope = (vk[idx + 1] - vk[idx]) / (tk[idx + 1] - tk[idx])
        tau = tc - tk[idx]
        return before + self._cum[idx] + vk[idx] * tau + 0.5 * slope * tau**2 + after

    def distance(self, t):
        """Distance travelled since t = 0 (exact integral of the linear pieces)."""
        return self._integral(t) - self._integral(0.0)

    def time_at_distance(self, s: float) -> float:
        s = float(s)
        if s <= 0:
            return 0.0
        hi = max(1.0, s / self.v.min())
        while self.distance(hi) < s:
            hi *= 2
        return brentq(lambda t: float(self.distance(t)) - s, 0.0, hi, xtol=1e-12)


@dataclass
class SimTrace:
    dt: float
    vertical_acc: np.ndarray
    lateral_acc: np.ndarray
    speed: np.ndarray
    station: np.ndarray
    true_inputs: np.ndarray
    model: str = "qc"
    truncated: bool = False
    lat: Optional[np.ndarray] = field(default=None, repr=False)
    lon: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return self.vertical_acc.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self))

    def measurements(self, channels: str = "vertical") -> np.ndarray:
        """Measurement matrix (N, p) for ``vertical``, ``lateral`` or ``both``."""
        cols = {"vertical": [self.vertical_acc], "lateral": [self.lateral_acc],
                "both": [self.vertical_acc, self.lateral_acc]}
        if channels not in cols:
            raise ValidationError(f"unknown channel selection {channels!r}")
        return np.column_stack(cols[channels])


def synth_profile(road_class: str, length: float, S: float = 0.1, seed=None, rho: float = 0.9,
                  band=ISO_BAND, origin=None, heading_deg: float = 90.0) -> RoadProfile:
    """Random two-track profile with an ISO 8608 style ``n^-2`` displacement PSD.

    Fourier coefficients are complex Gaussian, so each track is a stationary
    Gaussian process; the right track mixes the left one with an independent
    draw to reach correlation ``rho``. With ``origin=(lat, lon)`` the profile
    is geotagged along a straight line.
    """
    key = str(road_class).upper()
    if key not in ISO_CLASSES:
        raise ValidationError(f"road class must be one of {sorted(ISO_CLASSES)}, got {road_class!r}")
    if not length >= 40:
        raise ValidationError(f"profile length must be >= 40 m, got {length}")
    if not S > 0 or S > length:
        raise ValidationError(f"invalid spacing {S}")
    if not -1 <= rho <= 1:
        raise ValidationError(f"track correlation must be in [-1, 1], got {rho}")
    n_samples = int(round(length / S)) + 1
    n = np.fft.rfftfreq(n_samples, S)
    dn = 1.0 / (n_samples * S)
    psd = np.zeros_like(n)
    inband = (n >= band[0]) & (n <= band[1]) & (n > 0)
    psd[inband] = ISO_CLASSES[key] * (n[inband] / ISO_N0) ** -2
    scale = np.sqrt(psd * dn / 4.0) * n_samples

    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((4, n.size))
    a = draws[0] + 1j * draws[1]
    b = draws[2] + 1j * draws[3]
    left = np.fft.irfft(scale * a, n_samples)
    right = np.fft.irfft(scale * (rho * a + np.sqrt(1 - rho**2) * b), n_samples)
    left -= left.mean()
    right -= right.mean()
    lat = lon = None
    if origin is not None:
        from .geomatch import offset_positions
        lat, lon = offset_positions(origin, S * np.arange(n_samples), heading_deg)
    return RoadProfile(S, left, right, lat, lon)


# --- forward simulation -----------------------------------------------------

def _rk4_step(A, B, h, x, u0, um, u1):
    k1 = A @ x + B @ u0
    k2 = A @ (x + 0.5 * h * k1) + B @ um
    k3 = A @ (x + 0.5 * h * k2) + B @ um
    k4 = A @ (x + h * k3) + B @ u1
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_substep_maps(A, B, h):
    """Linear maps of one RK4 step: x+ = M x + N0 u(t) + Nm u(t+h/2) + N1 u(t+h)."""
    n, m = B.shape
    Zmn, Zm = np.zeros((m, n)), np.zeros((m, m))
    Im, In = np.eye(m), np.eye(n)
    M = _rk4_step(A, B, h, In, Zmn, Zmn, Zmn)
    N0 = _rk4_step(A, B, h, np.zeros((n, m)), Im, Zm, Zm)
    Nm = _rk4_step(A, B, h, np.zeros((n, m)), Zm, Im, Zm)
    N1 = _rk4_step(A, B, h, np.zeros((n, m)), Zm, Zm, Im)
    return M, N0, Nm, N1


def rk4_sample_maps(A, B, dt, substeps=10):
    """Compose ``substeps`` RK4 steps into ``x[k+1] = Phi x[k] + sum_j Gam[j] w_j``.

    ``w_j`` is the input at ``t_k + j * h / 2`` for ``j = 0 .. 2 * substeps``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    h = dt / substeps
    M, N0, Nm, N1 = _rk4_substep_maps(A, B, h)
    n, m = B.shape
    Phi = np.eye(n)
    Gam = np.zeros((2 * substeps + 1, n, m))
    for j in range(substeps):
        Phi = M @ Phi
        Gam = np.einsum("ab,jbc->jac", M, Gam)
        Gam[2 * j] += N0
        Gam[2 * j + 1] += Nm
        Gam[2 * j + 2] += N1
    return Phi, Gam


def propagate(Phi, drive_terms, x0):
    """States at sample times for ``x[k+1] = Phi x[k] + d[k]``; returns (K+1, n)."""
    K, n = drive_terms.shape
    X = np.empty((K + 1, n))
    x = np.asarray(x0, dtype=float).copy()
    X[0] = x
    for k in range(K):
        x = Phi @ x + drive_terms[k]
        X[k + 1] = x
    return X


def response(ss: StateSpace, W, dt, substeps=10, x0=None):
    """Outputs at sample times for inputs on the half-substep grid.

    ``W`` has shape (K - 1, 2 * substeps + 1, m): per sampling interval, the
    inputs at its half-substep points. Returns (states (K, n), outputs (K, p)).
    """
    Phi, Gam = rk4_sample_maps(ss.A, ss.B, dt, substeps)
    W = np.asarray(W, dtype=float)
    if x0 is None:
        x0 = equilibrium_state(ss, W[0, 0]) if W.shape[0] else np.zeros(ss.n)
    d = np.einsum("jnm,kjm->kn", Gam, W)
    X = propagate(Phi, d, x0)
    return X, X @ ss.C.T


def simulate_inputs(ss: StateSpace, u, dt, substeps=10, x0=None):
    """Respond to sampled inputs ``u`` (K, m), linearly interpolated in time.

    Starts at the static equilibrium of ``u[0]`` unless ``x0`` is given.
    Returns outputs (K, p).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] < 2:
        raise ValidationError("need at least 2 input samples")
    frac = np.linspace(0.0, 1.0, 2 * substeps + 1)
    W = u[:-1, None, :] * (1 - frac)[None, :, None] + u[1:, None, :] * frac[None, :, None]
    if x0 is None:
        x0 = equilibrium_state(ss, u[0])
    _, Y = response(ss, W, dt, substeps, x0)
    return Y


def simulate_linear_inputs(ss: StateSpace, u, dt, x0=None):
    """Exact response to sampled inputs ``u`` (K, m) varying linearly between samples.

    First-order-hold discretisation; unlike the RK4 path it stays stable for
    arbitrarily stiff parameters. Starts at the static equilibrium of
    ``u[0]`` unless ``x0`` is given. Returns outputs (K, p).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] < 2:
        raise ValidationError("need at least 2 input samples")
    if x0 is None:
        x0 = equilibrium_state(ss, u[0])
    sys = signal.StateSpace(ss.A, ss.B, ss.C, np.zeros((ss.C.shape[0], ss.m)))
    _, y, _ = signal.lsim(sys, u, dt * np.arange(u.shape[0]), X0=x0, interp=True)
    return np.asarray(y).reshape(u.shape[0], -1)


def drive(profile: RoadProfile, speed: SpeedProfile, params: VehicleParams, model: str = "qc",
          dt: float = 0.02, noise_std: float = 0.0, seed=None, duration: Optional[float] = None,
          substeps: int = 10) -> SimTrace:
    """Drive a vehicle model over ``profile`` and record IMU-like measurements.

    The wheel input at time t is the profile at station s(t), linearly
    interpolated between samples. Integration is fixed-step RK4 with
    ``substeps`` steps per output sample. The quarter-car sees the track
    average; the half-car sees both tracks. The vehicle starts at rest in
    static equilibrium on the initial elevation.
    """
    model = model.lower()
    if model not in ("qc", "hc"):
        raise ValidationError(f"model must be 'qc' or 'hc', got {model!r}")
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    if noise_std < 0:
        raise ValidationError("noise_std must be >= 0")
    ss = build_qc(params) if model == "qc" else build_hc(params)

    t_max = speed.time_at_distance(profile.length)
    truncated = False
    if duration is None:
        duration = t_max
    elif duration > t_max + 1e-12:
        warnings.warn(f"vehicle leaves the profile after {t_max:.3f} s; trace truncated")
        truncated = True
        duration = t_max
    K = int(np.floor(duration / dt + 1e-9)) + 1
    if K < 2:
        raise ValidationError("profile too short for a single sampling interval")

    h2 = dt / (2 * substeps)
    t_grid = (np.arange(K - 1)[:, None] * dt + np.arange(2 * substeps + 1)[None, :] * h2)
    stations = np.minimum(speed.distance(t_grid), profile.length)
    left, right = profile.tracks()
    st = profile.stations
    ul = np.interp(stations, st, left)
    ur = np.interp(stations, st, right)
    W = (0.5 * (ul + ur))[..., None] if model == "qc" else np.stack([ul, ur], axis=-1)

    t = dt * np.arange(K)
    s_k = np.minimum(speed.distance(t), profile.length)
    u_k = np.column_stack([np.interp(s_k, st, left), np.interp(s_k, st, right)])
    u0 = u_k[0].mean(keepdims=True) if model == "qc" else u_k[0]
    _, Y = response(ss, W, dt, substeps, equilibrium_state(ss, u0))

    rng = np.random.default_rng(seed)
    vertical = Y[:, 0].copy()
    lateral = Y[:, 1].copy() if model == "hc" else np.zeros(K)
    if noise_std > 0:
        vertical += noise_std * rng.standard_normal(K)
        if model == "hc":
            lateral += noise_std * rng.standard_normal(K)
    lat = lon = None
    if profile.has_geotags:
        lat = np.interp(s_k, st, profile.lat)
        lon = np.interp(s_k, st, profile.lon)
    return SimTrace(dt, vertical, lateral, speed.at(t), s_k, u_k, model, truncated, lat, lon)
