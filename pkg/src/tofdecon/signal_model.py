"""Trace and spectrum types plus the spectral primitives the other stages use.

Transform convention (used everywhere in the package): the forward DFT is
unnormalized and the inverse carries ``1/N``, i.e. ``numpy.fft`` defaults.
Parseval therefore reads ``sum(|x|**2) == sum(|X|**2) / N``, and the DFT of a
biased autocorrelation is directly the periodogram-style power spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTraceError

HERMITIAN_RTOL = 1e-9
TAPER_KINDS = ("none", "hann-lag")


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


@dataclass(frozen=True, eq=False)
class RfTrace:
    """Uniformly sampled real A-scan.

    Parameters
    ----------
    samples : array_like
        Real amplitudes, arbitrary linear units.
    fs : float
        Sampling rate in Hz.
    t0 : float
        Time of the first sample in seconds.
    """

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples)
        if np.iscomplexobj(x):
            raise InvalidTraceError("trace samples must be real")
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise InvalidTraceError(f"trace must be 1-D, got shape {x.shape}")
        if x.size < 2:
            raise InvalidTraceError("trace needs at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise InvalidTraceError("trace contains non-finite samples")
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise InvalidTraceError(f"sampling rate must be positive, got {self.fs}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self):
        return self.samples.size

    @property
    def time(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    def with_samples(self, samples) -> "RfTrace":
        return RfTrace(samples, self.fs, self.t0)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Full-length DFT bins over ``0 .. (N-1)*df``.

    ``hermitian`` asserts that the bins describe a real time signal; it is
    checked on construction.  ``diagnostics`` carries per-stage counters
    (clamped bins and the like) and never affects the numbers.
    """

    bins: np.ndarray
    df: float
    hermitian: bool = True
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.ascontiguousarray(self.bins, dtype=np.complex128)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("spectrum must be a 1-D array of at least 2 bins")
        object.__setattr__(self, "bins", b)
        if self.hermitian and not is_hermitian(b):
            raise ValueError("bins flagged hermitian are not conjugate-symmetric")

    @property
    def nfft(self) -> int:
        return self.bins.size

    @property
    def nyquist_bin(self) -> int:
        return self.bins.size // 2

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.bins.size) * self.df

    @property
    def positive(self) -> np.ndarray:
        """Bins ``0 .. nyquist_bin`` inclusive."""
        return self.bins[: self.nyquist_bin + 1]

    def to_trace(self, n: int, fs: float, t0: float = 0.0) -> RfTrace:
        """Inverse transform truncated to ``n`` samples.

        Only valid for hermitian spectra; the imaginary residue is discarded
        after checking it is at round-off level.
        """
        x = np.fft.ifft(self.bins)
        check_real(x)
        return RfTrace(x.real[:n].copy(), fs, t0)


@dataclass(frozen=True, eq=False)
class AnalyticTrace:
    real_part: np.ndarray
    imag_part: np.ndarray
    fs: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.real_part, self.imag_part)


@dataclass(frozen=True, eq=False)
class Autocorrelation:
    """Lag window applied values ``r[0..max_lag]`` of a trace."""

    values: np.ndarray
    max_lag: int
    taper: str
    fs: float


def is_hermitian(bins: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    n = bins.size
    k = np.arange(1, n)
    scale = max(float(np.max(np.abs(bins))), np.finfo(float).tiny)
    return bool(np.all(np.abs(bins[k] - np.conj(bins[n - k])) <= rtol * scale))


def check_real(x: np.ndarray, rtol: float = HERMITIAN_RTOL) -> float:
    """Relative imaginary residue of an inverse transform; raises if too big."""
    peak = float(np.max(np.abs(x.real))) if x.size else 0.0
    resid = float(np.max(np.abs(x.imag))) if x.size else 0.0
    rel = resid / peak if peak > 0 else resid
    if rel > rtol:
        raise ArithmeticError(f"imaginary residue {rel:.3e} exceeds {rtol:g}")
    return rel


def spectrum_of(trace: RfTrace, nfft: int | None = None) -> Spectrum:
    """Zero-padded DFT of a trace."""
    nfft = len(trace) if nfft is None else int(nfft)
    if nfft < len(trace):
        raise ValueError(f"nfft={nfft} shorter than trace length {len(trace)}")
    return Spectrum(np.fft.fft(trace.samples, nfft), trace.fs / nfft, hermitian=True)


def _hilbert_multiplier(n: int) -> np.ndarray:
    # -i*sgn(k): zero at DC and (for even n) Nyquist
    h = np.zeros(n, dtype=np.complex128)
    half = (n + 1) // 2
    h[1:half] = -1j
    h[n // 2 + 1:] = 1j
    return h


def hilbert_transform(x: np.ndarray) -> np.ndarray:
    """Periodic discrete Hilbert transform of a real sequence."""
    X = np.fft.fft(x)
    return np.fft.ifft(X * _hilbert_multiplier(x.size)).real


def analytic_signal(trace: RfTrace) -> AnalyticTrace:
    """Analytic signal via the frequency-domain quadrature filter.

    The real part is the input itself; the imaginary part zeroes DC and
    Nyquist and applies ``-i*sgn(f)``.  No end tapering: the first/last few
    percent of samples carry wrap-around error.
    """
    if len(trace) < 8:
        raise InvalidTraceError("analytic signal needs at least 8 samples")
    x = trace.samples
    return AnalyticTrace(x.copy(), hilbert_transform(x), trace.fs)


def envelope(trace: RfTrace) -> RfTrace:
    a = analytic_signal(trace)
    return RfTrace(a.magnitude, trace.fs, trace.t0)


def phase_rotate(trace: RfTrace, phi: float) -> RfTrace:
    """Constant-phase rotation ``s*cos(phi) + H[s]*sin(phi)``."""
    h = hilbert_transform(trace.samples)
    return trace.with_samples(trace.samples * np.cos(phi) + h * np.sin(phi))


def lag_window(max_lag: int, kind: str) -> np.ndarray:
    if kind == "none":
        return np.ones(max_lag + 1)
    if kind == "hann-lag":
        if max_lag == 0:
            return np.ones(1)
        k = np.arange(max_lag + 1)
        return 0.5 * (1.0 + np.cos(np.pi * k / max_lag))
    raise ValueError(f"unknown taper {kind!r}; expected one of {TAPER_KINDS}")


def autocorrelation(trace: RfTrace, max_lag: int, taper_kind: str = "hann-lag") -> Autocorrelation:
    """Biased sample autocorrelation ``(1/N) sum s[n] s[n+k]`` times a lag window."""
    x = trace.samples
    n = x.size
    max_lag = int(max_lag)
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    nfft = next_pow2(n + max_lag + 1)
    X = np.fft.rfft(x, nfft)
    r = np.fft.irfft(X * np.conj(X), nfft)[: max_lag + 1] / n
    r = r * lag_window(max_lag, taper_kind)
    return Autocorrelation(r, max_lag, taper_kind, trace.fs)


def amplitude_spectrum_from_acf(acf: Autocorrelation, nfft: int) -> Spectrum:
    """Square root of the power spectrum implied by an autocorrelation.

    The lags are mirrored to negative lags, zero padded to ``nfft`` and
    transformed.  Negative power (a lag-window artifact) is clamped to zero;
    ``diagnostics["clamped_bins"]`` counts how many.
    """
    L = acf.max_lag
    nfft = int(nfft)
    if nfft < 2 * L + 1:
        raise ValueError(f"nfft={nfft} must be at least 2*max_lag+1={2 * L + 1}")
    buf = np.zeros(nfft)
    buf[: L + 1] = acf.values
    if L:
        buf[nfft - L:] = acf.values[1:][::-1]
    # mirror the half spectrum so the symmetry is exact; roundoff asymmetry
    # near zero power would otherwise be magnified by the square root
    half = np.fft.rfft(buf).real
    power = np.concatenate([half, half[1:(nfft + 1) // 2][::-1]])
    neg = power < 0
    power[neg] = 0.0
    return Spectrum(
        np.sqrt(power).astype(np.complex128),
        acf.fs / nfft,
        hermitian=True,
        diagnostics={"clamped_bins": int(neg.sum())},
    )
