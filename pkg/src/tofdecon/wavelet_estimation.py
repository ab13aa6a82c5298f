"""Blind pulse estimation by kurtosis maximization.

The magnitude of the pulse spectrum comes from the trace autocorrelation
(white-reflectivity assumption); the phase is the constant rotation that makes
the trace maximally non-Gaussian.  Kurtosis is 180-degree periodic in the
rotation angle, so the phase search covers ``[-pi/2, pi/2)`` and the overall
polarity of the estimate is not observable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationFailedError, InvalidTraceError, UndefinedKurtosisError
from .signal_model import (
    Autocorrelation,
    RfTrace,
    amplitude_spectrum_from_acf,
    autocorrelation,
    hilbert_transform,
    next_pow2,
)

DEFAULT_GRID_STEP = np.deg2rad(1.0)
TAPER_FRACTION = 0.1
MIN_WAVELET_LENGTH = 8


@dataclass(frozen=True, eq=False)
class KurtosisCurve:
    """Excess kurtosis of the rotated trace over the phase grid.

    ``best_angle`` is the grid argmax; ``refined_angle`` is the parabolic
    refinement through the neighbours of the argmax (equal to ``best_angle``
    when refinement is off).
    """

    angles: np.ndarray
    values: np.ndarray
    best_angle: float
    best_value: float
    refined_angle: float

    @property
    def step(self) -> float:
        return float(self.angles[1] - self.angles[0])


@dataclass(frozen=True, eq=False)
class WaveletEstimate:
    """Estimated pulse with zero lag at index ``len(samples) // 2``.

    ``phase`` is the constant phase of the pulse (the negated kurtosis-maximizing
    rotation), canonicalized into ``[-pi/2, pi/2)``.  ``scale`` is the factor the
    raw inverse transform was divided by to reach unit peak.
    """

    samples: np.ndarray
    fs: float
    phase: float = 0.0
    curve: KurtosisCurve | None = None
    scale: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.ascontiguousarray(self.samples, dtype=np.float64)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("wavelet must be a 1-D array of at least 2 samples")
        if not np.all(np.isfinite(w)):
            raise ValueError("wavelet contains non-finite samples")
        object.__setattr__(self, "samples", w)

    @property
    def center(self) -> int:
        return self.samples.size // 2

    def __len__(self):
        return self.samples.size


def wrap_half_turn(angle):
    """Map angles into ``[-pi/2, pi/2)``."""
    return (np.asarray(angle) + np.pi / 2) % np.pi - np.pi / 2


def _gate(x: np.ndarray, gate):
    if gate is None:
        return x
    start, end = gate
    if not 0 <= start < end <= x.shape[-1]:
        raise ValueError(f"gate {gate} outside trace of length {x.shape[-1]}")
    return x[..., start:end]


def _excess_kurtosis_rows(x: np.ndarray, demean: bool = True) -> np.ndarray:
    if demean:
        x = x - x.mean(axis=-1, keepdims=True)
    x2 = x * x
    m2 = x2.mean(axis=-1)
    m4 = (x2 * x2).mean(axis=-1)
    if np.any(m2 <= 0):
        raise UndefinedKurtosisError("kurtosis undefined for a zero-variance trace")
    return m4 / (m2 * m2) - 3.0


def excess_kurtosis(trace: RfTrace, demean: bool = True) -> float:
    """``E[s^4] / E[s^2]^2 - 3`` with plain sample means.

    The trace is mean-subtracted first unless ``demean`` is False.
    """
    x = trace.samples
    if x.size < 16:
        raise InvalidTraceError("kurtosis needs at least 16 samples")
    return float(_excess_kurtosis_rows(x, demean))


def phase_grid(grid_step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    count = np.pi / grid_step
    k = int(round(count))
    if k < 3 or abs(count - k) > 1e-6:
        raise ValueError(f"grid_step {grid_step} must divide pi evenly into >= 3 steps")
    return -np.pi / 2 + np.arange(k) * (np.pi / k)


def kurtosis_values(trace: RfTrace, angles: np.ndarray, gate=None) -> np.ndarray:
    """Excess kurtosis of ``phase_rotate(trace, a)`` for every ``a`` in ``angles``.

    The Hilbert transform is taken on the full trace; ``gate`` restricts the
    samples entering the moments.
    """
    x = trace.samples
    if x.size < 16:
        raise InvalidTraceError("kurtosis needs at least 16 samples")
    x = x - x.mean()
    h = hilbert_transform(x)
    xg, hg = _gate(x, gate), _gate(h, gate)
    rotated = np.cos(angles)[:, None] * xg + np.sin(angles)[:, None] * hg
    return _excess_kurtosis_rows(rotated)


def curve_from_values(angles: np.ndarray, values: np.ndarray, refine: bool = True) -> KurtosisCurve:
    """Locate the maximum of a (periodic) kurtosis curve."""
    i = int(np.argmax(values))
    best = float(angles[i])
    refined = best
    if refine:
        k = values.size
        y0, ym, yp = values[i], values[(i - 1) % k], values[(i + 1) % k]
        denom = ym - 2.0 * y0 + yp
        if denom < 0:
            offset = float(np.clip(0.5 * (ym - yp) / denom, -0.5, 0.5))
            refined = float(wrap_half_turn(best + offset * (np.pi / k)))
    return KurtosisCurve(angles, values, best, float(values[i]), refined)


def estimate_phase(trace: RfTrace, grid_step: float = DEFAULT_GRID_STEP, gate=None,
                   refine: bool = True) -> KurtosisCurve:
    """Grid search for the rotation angle maximizing kurtosis."""
    angles = phase_grid(grid_step)
    return curve_from_values(angles, kurtosis_values(trace, angles, gate), refine)


def dominant_period_acf(acf: Autocorrelation) -> float:
    """Period in samples of the magnitude-spectrum peak implied by ``acf``."""
    nfft = max(next_pow2(2 * acf.max_lag + 1), 1024)
    mag = amplitude_spectrum_from_acf(acf, nfft).positive.real
    mag[0] = 0.0
    k = int(np.argmax(mag))
    if mag[k] <= 0:
        raise EstimationFailedError("flat or empty spectrum; no dominant frequency")
    return nfft / k


def length_from_period(period: float, n_samples: int, periods: float = 3.0) -> int:
    L = int(np.ceil(periods * period))
    L += L % 2
    upper = (n_samples // 4) - ((n_samples // 4) % 2)
    return int(np.clip(L, MIN_WAVELET_LENGTH, max(upper, 2)))


def statistics_acf(trace: RfTrace, gate=None, max_lag=None) -> Autocorrelation:
    x = _gate(trace.samples, gate)
    x = x - x.mean()
    max_lag = x.size // 4 if max_lag is None else max_lag
    return autocorrelation(RfTrace(x, trace.fs), max_lag, "hann-lag")


def default_wavelet_length(trace: RfTrace, gate=None) -> int:
    """Three dominant periods, rounded up to even and capped at a quarter trace."""
    n = _gate(trace.samples, gate).size
    return length_from_period(dominant_period_acf(statistics_acf(trace, gate)), n)


def _edge_taper(L: int) -> np.ndarray:
    # cosine roll-off on the outer 10% of each half, symmetric about L//2
    d = np.abs(np.arange(L) - L // 2) / (L / 2)
    knee = 1.0 - TAPER_FRACTION
    t = np.ones(L)
    out = d > knee
    t[out] = 0.5 * (1.0 + np.cos(np.pi * (d[out] - knee) / TAPER_FRACTION))
    return t


def wavelet_from_statistics(acf: Autocorrelation, curve: KurtosisCurve, wavelet_length: int,
                            use_refined: bool = True) -> WaveletEstimate:
    """Build ``W(f) = |S(f)| exp(i*phi*sgn(f))`` and return it in the time domain."""
    L = int(wavelet_length)
    nfft = next_pow2(max(4 * L, 2 * acf.max_lag + 1))
    mag = amplitude_spectrum_from_acf(acf, nfft)
    if not np.any(mag.bins.real > 0):
        raise EstimationFailedError("magnitude spectrum is identically zero")
    phi = curve.refined_angle if use_refined else curve.best_angle
    sgn = np.zeros(nfft)
    sgn[1:(nfft + 1) // 2] = 1.0
    sgn[nfft // 2 + 1:] = -1.0
    W = mag.bins.real * np.exp(1j * phi * sgn)
    w = np.fft.ifft(W).real
    w = np.roll(w, L // 2)[:L] * _edge_taper(L)
    peak = float(np.max(np.abs(w)))
    if not peak > 0:
        raise EstimationFailedError("estimated wavelet vanished after truncation")
    return WaveletEstimate(
        w / peak,
        acf.fs,
        phase=float(wrap_half_turn(-phi)),
        curve=curve,
        scale=peak,
        diagnostics={"clamped_bins": mag.diagnostics["clamped_bins"], "nfft": nfft},
    )


def estimate_wavelet(trace: RfTrace, wavelet_length: int | None = None,
                     grid_step: float = DEFAULT_GRID_STEP, gate=None,
                     refine: bool = True) -> WaveletEstimate:
    """Estimate the propagating pulse of a single trace.

    Parameters
    ----------
    trace : RfTrace
    wavelet_length : int, optional
        Even support in samples; defaults to three dominant periods.
    grid_step : float
        Phase grid spacing in radians, must divide pi.
    gate : (int, int), optional
        Sample window used for the statistics.
    refine : bool
        Parabolic sub-grid refinement of the kurtosis maximum.
    """
    n = _gate(trace.samples, gate).size
    curve = estimate_phase(trace, grid_step, gate, refine)
    if wavelet_length is None:
        wavelet_length = default_wavelet_length(trace, gate)
    wavelet_length = int(wavelet_length)
    if wavelet_length % 2 or wavelet_length < 2:
        raise ValueError(f"wavelet_length must be even and >= 2, got {wavelet_length}")
    if wavelet_length > n // 4:
        raise ValueError(f"wavelet_length {wavelet_length} exceeds a quarter of {n} samples")
    acf = statistics_acf(trace, gate, wavelet_length)
    return wavelet_from_statistics(acf, curve, wavelet_length)
