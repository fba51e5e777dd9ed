"""Measurement preprocessing and amplitude spectra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ValidationError

STANDARD_GRAVITY = 9.82


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled signal. ``values`` is (N,) or (N, channels)."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise ValidationError(f"values must be 1-D or 2-D, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    @property
    def fs(self) -> float:
        return 1.0 / self.dt

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.t0, self.dt, values)


@dataclass(frozen=True)
class AmplitudeSpectrum:
    """One-sided magnitude spectrum on ``k * df`` for ``k = 0 .. N//2``."""

    df: float
    magnitudes: np.ndarray
    n_samples: int

    @property
    def freqs(self) -> np.ndarray:
        return self.df * np.arange(self.magnitudes.shape[0])


def remove_gravity(ts: TimeSeries, g: float = STANDARD_GRAVITY) -> TimeSeries:
    return ts.with_values(ts.values - g)


def _butter(ts: TimeSeries, fc: float, kind: str):
    nyq = 0.5 * ts.fs
    if not 0 < fc < nyq:
        raise ValidationError(f"cutoff must be in (0, {nyq:g}) Hz, got {fc}")
    return signal.butter(2, fc, btype=kind, fs=ts.fs, output="sos")


def _apply(sos, ts: TimeSeries) -> TimeSeries:
    x = ts.values
    if x.shape[0] == 0:
        return ts
    # start as if the first sample had been held forever
    zi = signal.sosfilt_zi(sos)
    zi = zi[..., None] * x[0] if x.ndim == 2 else zi * x[0]
    y, _ = signal.sosfilt(sos, x, axis=0, zi=zi)
    return ts.with_values(y)


def lowpass(ts: TimeSeries, fc: float) -> TimeSeries:
    """Causal second-order Butterworth low-pass (bilinear, prewarped)."""
    return _apply(_butter(ts, fc, "lowpass"), ts)


def highpass(ts: TimeSeries, fc: float) -> TimeSeries:
    """Causal second-order Butterworth high-pass (bilinear, prewarped)."""
    return _apply(_butter(ts, fc, "highpass"), ts)


def amplitude_spectrum(ts: TimeSeries) -> AmplitudeSpectrum:
    """|DFT| scaled by ``dt`` so it approximates the continuous Fourier amplitude.

    No window is applied.
    """
    n = len(ts)
    if n < 2:
        raise ValidationError("need at least 2 samples for a spectrum")
    mags = np.abs(np.fft.rfft(ts.values, axis=0)) * ts.dt
    return AmplitudeSpectrum(1.0 / (n * ts.dt), mags, n)


def smooth_spectrum(sp: AmplitudeSpectrum, width: float) -> AmplitudeSpectrum:
    """Centered moving average over ``round(width / df)`` bins.

    Edge bins average over the part of the window that exists.
    """
    if width < sp.df * (1 - 1e-12):
        raise ValidationError(f"smoothing width {width} Hz is below the bin width {sp.df:g} Hz")
    k = max(1, int(round(width / sp.df)))
    if k == 1:
        return sp
    mags = sp.magnitudes
    flat = mags.reshape(mags.shape[0], -1)
    n = flat.shape[0]
    lo = np.arange(n) - (k - 1) // 2
    hi = lo + k
    lo = np.clip(lo, 0, n)
    hi = np.clip(hi, 0, n)
    csum = np.vstack([np.zeros((1, flat.shape[1])), np.cumsum(flat, axis=0)])
    out = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    return AmplitudeSpectrum(sp.df, out.reshape(mags.shape), sp.n_samples)


def spectral_energy(sp: AmplitudeSpectrum) -> np.ndarray:
    """Two-sided energy ``sum |X(f)|^2 df`` reconstructed from the one-sided bins."""
    m = sp.magnitudes**2
    weights = np.full(m.shape[0], 2.0)
    weights[0] = 1.0
    if sp.n_samples % 2 == 0:
        weights[-1] = 1.0
    return sp.df * np.tensordot(weights, m, axes=(0, 0))
