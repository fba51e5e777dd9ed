"""Continuous-time suspension models: quarter-car, lateral half-car, Golden car.

All quantities are SI. State orderings:

* quarter-car: ``(z_s, dz_s, z_u, dz_u)``, input ``u`` (road elevation)
* half-car: ``(z_s, dz_s, theta, dtheta, z_ul, dz_ul, z_ur, dz_ur)``,
  inputs ``(u_l, u_r)``, outputs ``(vertical, lateral)`` acceleration.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import ValidationError

#: Reference speed of the roughness index (80 km/h) in m/s.
IRI_SPEED = 80.0 / 3.6

QC_STATES = ("z_s", "dz_s", "z_u", "dz_u")
HC_STATES = ("z_s", "dz_s", "theta", "dtheta", "z_ul", "dz_ul", "z_ur", "dz_ur")


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters shared by all models.

    ``I_s`` and ``l`` are only needed by the half-car model. The suspension
    spring and damper may be zero (decoupled wheel); everything else must be
    strictly positive.
    """

    m_s: float
    m_u: float
    K_s: float
    C_s: float
    K_t: float
    I_s: Optional[float] = None
    l: Optional[float] = None

    def __post_init__(self):
        for name in ("m_s", "m_u", "K_t"):
            _require(name, getattr(self, name), strict=True)
        for name in ("K_s", "C_s"):
            _require(name, getattr(self, name), strict=False)
        for name in ("I_s", "l"):
            value = getattr(self, name)
            if value is not None:
                _require(name, value, strict=True)

    def with_(self, **changes) -> "VehicleParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("m_s", "m_u", "K_s", "C_s", "K_t", "I_s", "l")}


def _require(name, value, strict):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(v) or (v <= 0 if strict else v < 0):
        bound = "> 0" if strict else ">= 0"
        raise ValidationError(f"{name} must be {bound}, got {value!r}")


def golden_car_params() -> VehicleParams:
    """The standard Golden-car parameter set used to define the roughness index."""
    return VehicleParams(m_s=1000.0, m_u=37.5, K_s=15825.0, C_s=1500.0, K_t=163250.0)


def identified_car_params() -> VehicleParams:
    """Half-car parameters identified for a mid-size passenger car (gain 0.72 not included)."""
    return VehicleParams(m_s=2400.0, m_u=90.0, K_s=37050.0, C_s=4290.0, K_t=370600.0,
                         I_s=1960.0, l=1.0)


#: Spectral gain identified together with :func:`identified_car_params`.
IDENTIFIED_GAIN = 0.72

NAMED_PARAMS = {
    "golden": golden_car_params,
    "audi": identified_car_params,
}


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()

    def __post_init__(self):
        A, B, C = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (self.A, self.B, self.C))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValidationError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValidationError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValidationError(f"C must have {n} columns, got {C.shape}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def select_outputs(self, rows: Sequence[int]) -> "StateSpace":
        rows = list(rows)
        labels = tuple(self.output_labels[i] for i in rows) if self.output_labels else ()
        return StateSpace(self.A, self.B, self.C[rows], self.state_labels, self.input_labels, labels)


@dataclass(frozen=True)
class DiscreteStateSpace:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    T: float
    source: Optional[StateSpace] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValidationError(f"sampling time must be > 0, got {self.T}")
        for name in ("F", "G", "H"):
            object.__setattr__(self, name, _frozen(np.atleast_2d(getattr(self, name))))

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def p(self) -> int:
        return self.H.shape[0]


def build_qc(params: VehicleParams) -> StateSpace:
    """Quarter-car model; the sprung equation uses a quarter of the total sprung mass."""
    ms4 = params.m_s / 4.0
    ks, cs, kt, mu = params.K_s, params.C_s, params.K_t, params.m_u
    accel_s = [-ks / ms4, -cs / ms4, ks / ms4, cs / ms4]
    A = [
        [0.0, 1.0, 0.0, 0.0],
        accel_s,
        [0.0, 0.0, 0.0, 1.0],
        [ks / mu, cs / mu, -(ks + kt) / mu, -cs / mu],
    ]
    B = [[0.0], [0.0], [0.0], [kt / mu]]
    return StateSpace(A, B, [accel_s], QC_STATES, ("u",), ("vertical",))


def build_hc(params: VehicleParams) -> StateSpace:
    """Lateral half-car with the IMU centred between the wheels.

    Output row 0 is the vertical sprung-mass acceleration, row 1 the roll
    acceleration; the proportionality to measured lateral acceleration is
    absorbed into ``I_s``.
    """
    if params.I_s is None or params.l is None:
        raise ValidationError("half-car model requires I_s and l")
    ms2 = params.m_s / 2.0
    ks, cs, kt, mu, Is, l = params.K_s, params.C_s, params.K_t, params.m_u, params.I_s, params.l
    heave = [-2 * ks / ms2, -2 * cs / ms2, 0, 0, ks / ms2, cs / ms2, ks / ms2, cs / ms2]
    roll = [0, 0, -2 * ks * l**2 / Is, -2 * cs * l**2 / Is, -ks * l / Is, -cs * l / Is, ks * l / Is, cs * l / Is]
    A = [
        [0, 1, 0, 0, 0, 0, 0, 0],
        heave,
        [0, 0, 0, 1, 0, 0, 0, 0],
        roll,
        [0, 0, 0, 0, 0, 1, 0, 0],
        [ks / mu, cs / mu, -ks * l / mu, -cs * l / mu, -(ks + kt) / mu, -cs / mu, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 1],
        [ks / mu, cs / mu, ks * l / mu, cs * l / mu, 0, 0, -(ks + kt) / mu, -cs / mu],
    ]
    B = np.zeros((8, 2))
    B[5, 0] = kt / mu
    B[7, 1] = kt / mu
    return StateSpace(A, B, [heave, roll], HC_STATES, ("u_l", "u_r"), ("vertical", "lateral"))


def rattle_output(ss: StateSpace) -> np.ndarray:
    """Row selecting the rattle-space velocity ``dz_s - dz_u`` of a quarter-car."""
    if ss.n != 4 or ss.m != 1:
        raise ValidationError(f"rattle output needs a quarter-car system, got n={ss.n}, m={ss.m}")
    return np.array([0.0, 1.0, 0.0, -1.0])


def equilibrium_state(ss: StateSpace, u) -> np.ndarray:
    """Static state for a constant input, i.e. the solution of ``A x = -B u``.

    Least squares so that a decoupled sprung mass (K_s = C_s = 0) still gets
    an answer.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x, *_ = np.linalg.lstsq(ss.A, -ss.B @ u, rcond=None)
    return x


def discretize(ss: StateSpace, T: float) -> DiscreteStateSpace:
    """Zero-order-hold discretization through the augmented matrix exponential."""
    T = float(T)
    if not T > 0:
        raise ValidationError(f"sampling time must be > 0, got {T}")
    n, m = ss.n, ss.m
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = ss.A
    aug[:n, n:] = ss.B
    E = expm(aug * T)
    return DiscreteStateSpace(E[:n, :n], E[:n, n:], ss.C, T, ss)


def discretize_linear_hold(ss: StateSpace, T: float):
    """Exact discretization for an input that ramps linearly between samples.

    Returns ``(F, G0, G1)`` with ``x[k+1] = F x[k] + G0 u[k] + G1 u[k+1]``.
    """
    T = float(T)
    if not T > 0:
        raise ValidationError(f"sampling time must be > 0, got {T}")
    n, m = ss.n, ss.m
    aug = np.zeros((n + 2 * m, n + 2 * m))
    aug[:n, :n] = ss.A
    aug[:n, n:n + m] = ss.B
    aug[n:n + m, n + m:] = np.eye(m) / T
    E = expm(aug * T)
    F, P, R = E[:n, :n], E[:n, n:n + m], E[:n, n + m:]
    return F, P - R, R


def frequency_response(ss: StateSpace, freqs, C=None) -> np.ndarray:
    """Complex response ``C (j w I - A)^-1 B`` at frequencies in Hz, shape (F, p, m)."""
    C = ss.C if C is None else np.atleast_2d(C)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    eye = np.eye(ss.n)
    out = np.empty((freqs.size, C.shape[0], ss.m), dtype=complex)
    for i, f in enumerate(freqs):
        out[i] = C @ np.linalg.solve(2j * np.pi * f * eye - ss.A, ss.B)
    return out


def iri_gain(freqs, params: Optional[VehicleParams] = None) -> np.ndarray:
    """Gain from road elevation to rattle velocity, divided by the 80 km/h reference speed.

    For the Golden car this peaks near 10.7 Hz at about 4.85 and is close to
    one at 3 Hz and 33 Hz.
    """
    ss = build_qc(params or golden_car_params())
    H = frequency_response(ss, freqs, C=rattle_output(ss))
    return np.abs(H[:, 0, 0]) / IRI_SPEED
