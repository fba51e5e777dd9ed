"""Kalman filter with unknown-input (road profile) reconstruction.

The road input is not used in the time update; it is modelled as zero-mean
process noise with covariance ``Q`` and recovered afterwards from the state
transition as::

    u[k|k+1] = Q G^T P[k+1|k]^-1 (x[k+1|k+1] - F x[k|k])
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy import linalg

from .errors import NumericalError, ValidationError
from .models import DiscreteStateSpace, VehicleParams, build_hc, build_qc, discretize

DEFAULT_QR_RATIO = 1e9
DEFAULT_NOISE_STD = 0.05

_CHANNEL_ROWS = {"vertical": [0], "lateral": [1], "both": [0, 1]}


@dataclass(frozen=True)
class KfConfig:
    """Noise model and initialisation.

    ``R`` must be positive definite; ``Q`` and ``P0`` may be semidefinite.
    ``P0`` and ``x0`` describe the prior before the first measurement. With
    ``P0=None`` the filter starts from the steady-state prior covariance
    (stabilising solution of the discrete Riccati equation).
    """

    Q: np.ndarray
    R: np.ndarray
    P0: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("Q", "R", "P0"):
            M = getattr(self, name)
            if M is None:
                continue
            M = np.atleast_2d(np.asarray(M, dtype=float))
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, rtol=1e-12, atol=0):
                raise ValidationError(f"{name} must be a symmetric matrix")
            lam = np.linalg.eigvalsh(M)
            if name == "R" and lam.min() <= 0:
                raise ValidationError("R must be positive definite")
            if lam.min() < -1e-12 * max(lam.max(), 0.0):
                raise ValidationError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, M)
        if self.x0 is not None:
            object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))

    @classmethod
    def from_ratio(cls, n_inputs: int, n_outputs: int, qr_ratio: float = DEFAULT_QR_RATIO,
                   noise_std: float = DEFAULT_NOISE_STD, P0=None, x0=None) -> "KfConfig":
        """``R = sigma^2 I`` and ``Q = qr_ratio * sigma^2 I``."""
        if not qr_ratio > 0 or not noise_std > 0:
            raise ValidationError("qr_ratio and noise_std must be > 0")
        r = noise_std**2
        return cls(qr_ratio * r * np.eye(n_inputs), r * np.eye(n_outputs), P0, x0)


@dataclass(frozen=True)
class KfState:
    x: np.ndarray
    P: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class InputEstimate:
    u: np.ndarray
    t: float
    innovation: Optional[np.ndarray] = None


def _check_dims(state: KfState, dss: DiscreteStateSpace, cfg: KfConfig):
    n = dss.n
    if state.x.shape != (n,) or state.P.shape != (n, n):
        raise ValidationError(f"state dimension mismatch: x {state.x.shape}, P {state.P.shape}, n={n}")
    if cfg.Q.shape != (dss.m, dss.m):
        raise ValidationError(f"Q must be {dss.m}x{dss.m}, got {cfg.Q.shape}")
    if cfg.R.shape != (dss.p, dss.p):
        raise ValidationError(f"R must be {dss.p}x{dss.p}, got {cfg.R.shape}")


def _sym(P):
    return 0.5 * (P + P.T)


def time_update(state: KfState, dss: DiscreteStateSpace, cfg: KfConfig) -> KfState:
    _check_dims(state, dss, cfg)
    F, G = dss.F, dss.G
    x = F @ state.x
    P = _sym(F @ state.P @ F.T + G @ cfg.Q @ G.T)
    return KfState(x, P, state.k + 1)


def measurement_update(state: KfState, y, dss: DiscreteStateSpace, cfg: KfConfig):
    """Standard update; the covariance uses the Joseph form. Returns (state, innovation)."""
    _check_dims(state, dss, cfg)
    H, P, R = dss.H, state.P, cfg.R
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (dss.p,):
        raise ValidationError(f"measurement must have {dss.p} entries, got {y.shape}")
    S = _sym(H @ P @ H.T + R)
    try:
        K = linalg.solve(S, H @ P, assume_a="pos").T
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"innovation covariance not invertible: {exc}", state.k) from None
    eps = y - H @ state.x
    x = state.x + K @ eps
    IKH = np.eye(dss.n) - K @ H
    P = _sym(IKH @ P @ IKH.T + K @ R @ K.T)
    return KfState(x, P, state.k), eps


def input_estimate(prev: KfState, pred_P, curr: KfState, dss: DiscreteStateSpace, cfg: KfConfig,
                   innovation=None) -> InputEstimate:
    """Least-squares input explaining the transition ``prev.x -> curr.x``.

    Solved with a symmetric-indefinite (Bunch-Kaufman) factorisation of
    ``pred_P``; no explicit inverse is formed.
    """
    dx = curr.x - dss.F @ prev.x
    with warnings.catch_warnings():
        # P[k+1|k] is badly conditioned at large Q/R; the solve is still accurate along G
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        try:
            z = linalg.solve(pred_P, dx, assume_a="sym")
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"predicted covariance singular: {exc}", prev.k) from None
    u = cfg.Q @ dss.G.T @ z
    return InputEstimate(u, prev.k * dss.T, innovation)


def steady_state_prior(dss: DiscreteStateSpace, cfg: KfConfig) -> np.ndarray:
    """Stabilising solution of the filter Riccati equation (prior covariance)."""
    W = _sym(dss.G @ cfg.Q @ dss.G.T)
    return _sym(linalg.solve_discrete_are(dss.F.T, dss.H.T, W, cfg.R))


@dataclass
class InputEstimates:
    """Result of :func:`run_filter`, stored as arrays.

    ``u[k]`` is the input acting over ``[t[k], t[k] + T)``. Iterating yields
    :class:`InputEstimate` records.
    """

    t: np.ndarray
    u: np.ndarray
    innovations: np.ndarray
    filtered_outputs: np.ndarray
    model: str
    channels: str
    final_state: Optional[KfState] = None

    def __len__(self):
        return self.t.shape[0]

    def __iter__(self) -> Iterator[InputEstimate]:
        for k in range(len(self)):
            yield InputEstimate(self.u[k], float(self.t[k]), self.innovations[k])

    def __getitem__(self, k) -> InputEstimate:
        return InputEstimate(self.u[k], float(self.t[k]), self.innovations[k])

    def nominal_profile(self) -> np.ndarray:
        """Single-track estimate: the track average, or the left track for lateral-only runs."""
        if self.u.shape[1] == 1 or self.channels == "lateral":
            return self.u[:, 0].copy()
        return self.u.mean(axis=1)


def filter_system(params: VehicleParams, model: str, channels: str, dt: float) -> DiscreteStateSpace:
    """Discretised model restricted to the measured channels."""
    model = model.lower()
    if channels not in _CHANNEL_ROWS:
        raise ValidationError(f"channels must be vertical, lateral or both, got {channels!r}")
    if model == "qc":
        if channels != "vertical":
            raise ValidationError("the quarter-car model only has a vertical channel")
        ss = build_qc(params)
    elif model == "hc":
        ss = build_hc(params).select_outputs(_CHANNEL_ROWS[channels])
    else:
        raise ValidationError(f"model must be 'qc' or 'hc', got {model!r}")
    return discretize(ss, dt)


def run_filter(y, dt: float, params: VehicleParams, model: str = "qc", channels: str = "vertical",
               cfg: Optional[KfConfig] = None, t0: float = 0.0) -> InputEstimates:
    """Filter measurements ``y`` (N, p) and reconstruct the road input at every step.

    The first measurement updates the prior; each following sample runs a
    time update, a measurement update and the input reconstruction, giving
    N - 1 input estimates.
    """
    dss = filter_system(params, model, channels, dt)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[1] != dss.p:
        raise ValidationError(f"measurements must have shape (N, {dss.p}), got {y.shape}")
    if y.shape[0] < 2:
        raise ValidationError("need at least 2 measurement samples")
    if not np.all(np.isfinite(y)):
        raise ValidationError("measurements contain non-finite values")
    if cfg is None:
        cfg = KfConfig.from_ratio(dss.m, dss.p)
    P0 = cfg.P0
    if P0 is None:
        try:
            P0 = steady_state_prior(dss, cfg)
        except (linalg.LinAlgError, ValueError):
            P0 = 1e-2 * np.eye(dss.n)
    x0 = np.zeros(dss.n) if cfg.x0 is None else cfg.x0

    N = y.shape[0]
    u = np.empty((N - 1, dss.m))
    innov = np.empty((N - 1, dss.p))
    yf = np.empty((N, dss.p))
    state, _ = measurement_update(KfState(x0, P0, 0), y[0], dss, cfg)
    yf[0] = dss.H @ state.x
    for k in range(N - 1):
        pred = time_update(state, dss, cfg)
        curr, eps = measurement_update(pred, y[k + 1], dss, cfg)
        est = input_estimate(state, pred.P, curr, dss, cfg, eps)
        u[k] = est.u
        innov[k] = eps
        yf[k + 1] = dss.H @ curr.x
        state = curr
    t = t0 + dt * np.arange(N - 1)
    return InputEstimates(t, u, innov, yf, model.lower(), channels, state)
