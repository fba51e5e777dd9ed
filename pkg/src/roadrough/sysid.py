"""Grey-box half-car identification by amplitude-spectrum matching.

The free parameters are ``beta = (K_s, C_s, K_t, I_s)``; masses and the
half track width are fixed. A scalar gain ``mu`` on the simulated spectrum
is eliminated in closed form, so the search runs over four log-parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import ValidationError
from .models import VehicleParams, build_hc, golden_car_params
from .signals import TimeSeries, amplitude_spectrum, smooth_spectrum
from .simulate import simulate_linear_inputs

BETA_NAMES = ("K_s", "C_s", "K_t", "I_s")


def default_init() -> Tuple[np.ndarray, float]:
    g = golden_car_params()
    return np.array([g.K_s, g.C_s, g.K_t, 3000.0]), 1.0


@dataclass
class SysIdProblem:
    """Measured (vertical, lateral) response and the road inputs that produced it.

    ``road_inputs`` holds ``(u_l, u_r)`` on the same time grid as ``measured``.
    """

    measured: TimeSeries
    road_inputs: np.ndarray
    m_s: float
    m_u: float
    l: float
    band: Tuple[float, float] = (0.5, 15.0)
    smoothing: float = 0.5
    beta0: Optional[np.ndarray] = None
    mu0: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.measured.values, dtype=float)
        if y.ndim != 2 or y.shape[1] != 2:
            raise ValidationError(f"measured must have 2 channels (vertical, lateral), got {y.shape}")
        u = np.asarray(self.road_inputs, dtype=float)
        if u.shape != y.shape:
            raise ValidationError(f"road_inputs shape {u.shape} differs from measured {y.shape}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(u))):
            raise ValidationError("data contain non-finite values")
        self.road_inputs = u
        for name in ("m_s", "m_u", "l"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        lo, hi = self.band
        nyq = 0.5 * self.measured.fs
        if not 0 < lo < hi < nyq:
            raise ValidationError(f"band must satisfy 0 < lo < hi < {nyq:g} Hz, got {self.band}")
        if self.beta0 is None:
            self.beta0 = default_init()[0]
        self.beta0 = np.asarray(self.beta0, dtype=float)
        if self.beta0.shape != (4,) or np.any(self.beta0 <= 0):
            raise ValidationError("beta0 must hold 4 positive values")
        if not self.mu0 > 0:
            raise ValidationError("mu0 must be > 0")
        self._target = None

    def params(self, beta) -> VehicleParams:
        K_s, C_s, K_t, I_s = (float(b) for b in beta)
        return VehicleParams(self.m_s, self.m_u, K_s, C_s, K_t, I_s, self.l)

    def spectrum(self, y):
        """Smoothed in-band magnitudes (F, 2) and the matching frequencies."""
        sp = smooth_spectrum(amplitude_spectrum(self.measured.with_values(y)), self.smoothing)
        f = sp.freqs
        mask = (f >= self.band[0]) & (f <= self.band[1])
        if mask.sum() < 2:
            raise ValidationError("band contains fewer than 2 spectrum bins")
        return f[mask], sp.magnitudes[mask]

    @property
    def target(self):
        if self._target is None:
            self._target = self.spectrum(self.measured.values)
        return self._target


@dataclass
class SysIdResult:
    beta: np.ndarray
    mu: float
    cost: float
    initial_cost: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    message: str = ""

    def params(self, problem: SysIdProblem) -> VehicleParams:
        return problem.params(self.beta)

    def as_dict(self) -> dict:
        out = dict(zip(BETA_NAMES, (float(b) for b in self.beta)))
        out.update(mu=self.mu, cost=self.cost, iterations=self.iterations, converged=self.converged)
        return out


def _check_beta(beta):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (4,):
        raise ValidationError(f"beta must have 4 entries {BETA_NAMES}, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
        raise ValidationError(f"beta must be positive, got {beta}")
    return beta


def simulate_response(beta, problem: SysIdProblem) -> TimeSeries:
    """Half-car (vertical, lateral) response to the problem's road inputs."""
    ss = build_hc(problem.params(_check_beta(beta)))
    Y = simulate_linear_inputs(ss, problem.road_inputs, problem.measured.dt)
    return problem.measured.with_values(Y)


def _weights(f):
    w = np.empty_like(f)
    d = np.diff(f)
    w[0], w[-1] = 0.5 * d[0], 0.5 * d[-1]
    w[1:-1] = 0.5 * (d[:-1] + d[1:])
    return w


def optimal_gain(beta, problem: SysIdProblem, _pred=None) -> float:
    """Least-squares ``mu`` for fixed ``beta``: <|Y|,|Yhat|> / <|Yhat|,|Yhat|>."""
    f, Ym = problem.target
    Yp = problem.spectrum(simulate_response(beta, problem).values)[1] if _pred is None else _pred
    w = _weights(f)[:, None]
    den = np.sum(w * Yp**2)
    if den == 0:
        return 1.0
    return float(np.sum(w * Ym * Yp) / den)


def cost(beta, mu, problem: SysIdProblem, _pred=None) -> float:
    """Trapezoid integral over the band of ``(|Y| - mu |Yhat|)^2``, summed over both channels."""
    f, Ym = problem.target
    Yp = problem.spectrum(simulate_response(beta, problem).values)[1] if _pred is None else _pred
    return float(np.sum(_weights(f)[:, None] * (Ym - mu * Yp) ** 2))


def profile_cost(beta, problem: SysIdProblem) -> Tuple[float, float]:
    """Cost with ``mu`` at its optimum; returns (cost, mu)."""
    Yp = problem.spectrum(simulate_response(beta, problem).values)[1]
    mu = optimal_gain(beta, problem, Yp)
    if not mu > 0:
        # a non-positive gain is outside the model; fall back to the smallest admissible one
        mu = np.finfo(float).tiny
    return cost(beta, mu, problem, Yp), mu


def identify(problem: SysIdProblem, n_starts: int = 5, spread: float = 0.3, seed: int = 0,
             maxiter: int = 200, gtol: float = 1e-9) -> SysIdResult:
    """Multi-start BFGS over ``log(beta)`` with central finite-difference gradients.

    The first start is ``problem.beta0``; the others multiply it by
    log-normal factors of width ``spread``. The lowest final cost wins.
    """
    if n_starts < 1:
        raise ValidationError("n_starts must be >= 1")
    J0, mu0 = profile_cost(problem.beta0, problem)
    scale = J0 if J0 > 0 else 1.0

    def objective(theta):
        try:
            return profile_cost(np.exp(theta), problem)[0] / scale
        except ValidationError:
            return np.inf

    rng = np.random.default_rng(seed)
    theta0 = np.log(problem.beta0)
    starts = [theta0] + [theta0 + spread * rng.standard_normal(4) for _ in range(n_starts - 1)]
    best = None
    for th in starts:
        history = [objective(th)]

        def record(intermediate_result):
            history.append(float(intermediate_result.fun))

        res = optimize.minimize(objective, th, method="BFGS", jac="3-point",
                                options={"gtol": gtol, "maxiter": maxiter}, callback=record)
        # status 2: no further decrease possible at working precision
        converged = bool(res.success or res.status == 2)
        cand = (res.fun, res, history, converged)
        if best is None or cand[0] < best[0]:
            best = cand
    fun, res, history, converged = best
    beta = np.exp(res.x)
    J, mu = profile_cost(beta, problem)
    if not J <= J0:
        # exp(log(beta)) roundoff can lose to the start point when nothing improved
        beta, J, mu = problem.beta0.copy(), J0, mu0
    return SysIdResult(beta, mu, J, J0, int(res.nit), converged, [h * scale for h in history], str(res.message))
