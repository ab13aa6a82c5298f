"""Regularized least-squares inverse filtering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal_model import RfTrace, Spectrum, check_real, next_pow2
from .wavelet_estimation import WaveletEstimate


@dataclass(frozen=True)
class WienerConfig:
    """Inverse-filter settings.

    The regularizer is ``eps_factor * max|W|^2`` unless ``noise_variance`` is
    given, in which case that value is used as the additive term directly.
    ``nfft=None`` picks the next power of two >= trace + wavelet length.
    """

    eps_factor: float = 0.01
    nfft: int | None = None
    noise_variance: float | None = None

    def __post_init__(self):
        if not self.eps_factor > 0:
            raise ValueError(f"eps_factor must be positive, got {self.eps_factor}")
        if self.noise_variance is not None and not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive when given")


@dataclass(frozen=True, eq=False)
class DeconTrace:
    samples: np.ndarray
    fs: float
    spectrum: Spectrum
    wavelet_used: WaveletEstimate
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return self.samples.size

    @property
    def trace(self) -> RfTrace:
        return RfTrace(self.samples, self.fs)


def centered_wavelet_spectrum(wavelet: WaveletEstimate, nfft: int) -> np.ndarray:
    """DFT of the wavelet with its zero lag moved to index 0."""
    L = len(wavelet)
    if nfft < L:
        raise ValueError(f"nfft={nfft} shorter than wavelet length {L}")
    buf = np.zeros(nfft)
    idx = (np.arange(L) - wavelet.center) % nfft
    buf[idx] = wavelet.samples
    return np.fft.fft(buf)


def _regularizer(power: np.ndarray, cfg: WienerConfig) -> float:
    if cfg.noise_variance is not None:
        return float(cfg.noise_variance)
    return cfg.eps_factor * float(power.max())


def wiener_filter_spectrum(wavelet: WaveletEstimate, cfg: WienerConfig = WienerConfig(),
                           nfft: int | None = None) -> Spectrum:
    """``G = W* / (|W|^2 + eps)`` on an ``nfft`` grid.

    ``nfft`` falls back to ``cfg.nfft`` and then to the next power of two
    covering twice the wavelet.
    """
    nfft = nfft or cfg.nfft or next_pow2(2 * len(wavelet))
    W = centered_wavelet_spectrum(wavelet, nfft)
    power = (W * np.conj(W)).real
    if not power.max() > 0:
        raise ValueError("cannot invert an all-zero wavelet")
    eps = _regularizer(power, cfg)
    return Spectrum(np.conj(W) / (power + eps), wavelet.fs / nfft, hermitian=True,
                    diagnostics={"eps": eps})


def wiener_deconvolve(trace: RfTrace, wavelet: WaveletEstimate,
                      cfg: WienerConfig = WienerConfig()) -> DeconTrace:
    """Zero-phase reflectivity estimate ``S W* / (|W|^2 + eps)``.

    Zero padding to ``nfft >= len(trace) + len(wavelet)`` gives linear rather
    than circular convolution semantics; the output is cut back to the trace
    length.
    """
    if not np.isclose(trace.fs, wavelet.fs, rtol=1e-12, atol=0.0):
        raise ValueError(f"sampling rate mismatch: trace {trace.fs} Hz, wavelet {wavelet.fs} Hz")
    n = len(trace)
    nfft = cfg.nfft or next_pow2(n + len(wavelet))
    if nfft < n + len(wavelet):
        raise ValueError(f"nfft={nfft} too small for linear deconvolution of {n}+{len(wavelet)} samples")
    G = wiener_filter_spectrum(wavelet, cfg, nfft)
    R = np.fft.fft(trace.samples, nfft) * G.bins
    r = np.fft.ifft(R)
    residue = check_real(r)

    W = centered_wavelet_spectrum(wavelet, nfft)
    power = (W * np.conj(W)).real
    eps = G.diagnostics["eps"]
    passband = np.flatnonzero(power[: nfft // 2 + 1] >= 10.0 * eps)
    edges = (int(passband[0]), int(passband[-1])) if passband.size else None
    return DeconTrace(
        r.real[:n].copy(),
        trace.fs,
        Spectrum(R, trace.fs / nfft, hermitian=True),
        wavelet,
        diagnostics={"eps": eps, "passband_bins": edges, "nfft": nfft, "imag_residue": residue},
    )
