"""Autoregressive spectral extrapolation (ASE).

The high-SNR part of a deconvolved spectrum is modelled as an AR process in
the frequency index.  A complex Burg fit on that band predicts the missing
bins: backward with conjugated coefficients towards DC, forward towards
Nyquist.  Prediction-error filter convention: ``A(z) = 1 + sum a_i z^-i`` so
the forward predictor is ``x[r] = -sum a_i x[r-i]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .errors import BandTooNarrowError
from .signal_model import RfTrace, Spectrum, check_real
from .wiener_deconv import DeconTrace

log = logging.getLogger(__name__)

P_MAX_CAP = 40
CLAMP_FACTOR = 3.0
# residuals below this fraction of the segment power are numerically zero
AIC_RESIDUAL_FLOOR = 1e-13


@dataclass(frozen=True)
class BandSelection:
    m: int
    n: int
    threshold_db: float = -6.0
    smoothing_bins: int = 5

    @property
    def width(self) -> int:
        return self.n - self.m + 1


@dataclass(frozen=True, eq=False)
class ArModel:
    coeffs: np.ndarray
    order: int
    residual_power: float
    reflection_coeffs: np.ndarray
    residual_history: np.ndarray = field(default=None, repr=False)


def _burg(x: np.ndarray, p: int):
    """Order-recursive complex Burg; returns coeffs, reflection coeffs, E_0..E_p."""
    x = np.asarray(x, dtype=np.complex128)
    ef = x.copy()
    eb = x.copy()
    a = np.ones(1, dtype=np.complex128)
    k = np.zeros(p, dtype=np.complex128)
    E = np.empty(p + 1)
    E[0] = float(np.mean(np.abs(x) ** 2))
    for m in range(p):
        f = ef[1:]
        b = eb[:-1]
        den = float(np.sum((f * np.conj(f)).real + (b * np.conj(b)).real))
        if den > 0:
            km = -2.0 * np.sum(f * np.conj(b)) / den
        else:
            km = 0.0 + 0.0j
        mag = abs(km)
        if mag > 1.0:
            km = km / mag
        k[m] = km
        ext = np.concatenate([a, [0.0]])
        a = ext + km * np.conj(ext[::-1])
        ef, eb = f + km * b, b + np.conj(km) * f
        E[m + 1] = E[m] * max(0.0, 1.0 - abs(km) ** 2)
    return a[1:], k, E


def _check_segment(x: np.ndarray, p: int):
    if p < 1:
        raise ValueError(f"AR order must be >= 1, got {p}")
    if x.size < 2 * p + 1:
        raise ValueError(f"segment of {x.size} bins too short for order {p} (needs {2 * p + 1})")
    if not np.any(x != 0):
        raise ValueError("zero-energy segment")


def burg_fit(segment, p: int) -> ArModel:
    """Complex Burg AR fit minimizing summed forward and backward error."""
    x = np.asarray(segment, dtype=np.complex128)
    _check_segment(x, p)
    a, k, E = _burg(x, p)
    return ArModel(a, p, float(E[-1]), k, E)


def aic_table(segment, p_max: int) -> np.ndarray:
    """``N ln E_p + 2p`` for ``p = 1 .. p_max``."""
    x = np.asarray(segment, dtype=np.complex128)
    _check_segment(x, p_max)
    _, _, E = _burg(x, p_max)
    floor = E[0] * AIC_RESIDUAL_FLOOR
    p = np.arange(1, p_max + 1)
    return x.size * np.log(np.maximum(E[1:], floor)) + 2.0 * p


def select_order_aic(segment, p_max: int) -> int:
    """AIC order; ``argmin`` returns the first minimum so ties go to smaller p."""
    return int(np.argmin(aic_table(segment, p_max))) + 1


def select_band(spectrum: Spectrum, threshold_db: float = -6.0,
                smoothing_bins: int = 5) -> BandSelection:
    """Contiguous region around the magnitude peak above ``threshold_db``."""
    mag = np.abs(spectrum.positive)
    if smoothing_bins > 1:
        mag = uniform_filter1d(mag, int(smoothing_bins), mode="nearest")
    peak = int(np.argmax(mag))
    if not mag[peak] > 0:
        raise ValueError("degenerate spectrum: zero magnitude everywhere")
    above = mag >= mag[peak] * 10.0 ** (threshold_db / 20.0)
    m = peak
    while m > 0 and above[m - 1]:
        m -= 1
    n = peak
    while n < mag.size - 1 and above[n + 1]:
        n += 1
    if n - m + 1 < 3:
        raise BandTooNarrowError(f"band [{m}, {n}] narrower than 3 bins")
    return BandSelection(m, n, threshold_db, smoothing_bins)


def default_p_max(band: BandSelection) -> int:
    return max(1, min(band.width // 3, P_MAX_CAP))


def extrapolate_spectrum(spectrum: Spectrum, band: BandSelection, model: ArModel,
                         clamp_factor: float | None = CLAMP_FACTOR) -> Spectrum:
    """Fill the bins outside ``[m, n]`` by linear prediction.

    Bins below ``m`` use backward prediction with conjugated coefficients,
    bins above ``n`` forward prediction, both marching away from the band.
    Predicted magnitudes are capped at ``clamp_factor`` times the in-band
    maximum (``None`` disables the cap).  DC and Nyquist are forced real and
    the negative frequencies mirrored.
    """
    nfft = spectrum.nfft
    nyq = spectrum.nyquist_bin
    m, n, p = band.m, band.n, model.order
    if not 0 <= m < n <= nyq:
        raise ValueError(f"band [{m}, {n}] inconsistent with {nfft}-bin spectrum")
    if p >= band.width:
        raise ValueError(f"model order {p} not below band width {band.width}")

    X = spectrum.bins[: nyq + 1].copy()
    a = model.coeffs
    ac = np.conj(a)
    cap = None
    if clamp_factor is not None:
        cap = clamp_factor * float(np.max(np.abs(X[m:n + 1])))
    clamped = 0

    def limit(v):
        nonlocal clamped
        if cap is not None and abs(v) > cap:
            clamped += 1
            return v * (cap / abs(v))
        return v

    for l in range(m - 1, -1, -1):
        X[l] = limit(-np.dot(ac, X[l + 1:l + p + 1]))
    for r in range(n + 1, nyq + 1):
        X[r] = limit(-np.dot(a, X[r - p:r][::-1]))

    if m > 0:
        X[0] = X[0].real
    if n < nyq and nfft % 2 == 0:
        X[nyq] = X[nyq].real

    # write only the predicted bins and their mirrors so everything else,
    # the band included, stays bit-identical to the input
    out = spectrum.bins.astype(np.complex128, copy=True)
    filled = np.r_[0:m, n + 1:nyq + 1]
    out[filled] = X[filled]
    mirror = filled[(filled > 0) & (nfft - filled != filled)]
    out[nfft - mirror] = np.conj(X[mirror])
    return Spectrum(out, spectrum.df, hermitian=True, diagnostics={"clamped_bins": clamped})


@dataclass(frozen=True, eq=False)
class AseResult:
    """Broadened trace plus everything needed to inspect how it was made."""

    trace: RfTrace
    spectrum: Spectrum
    band: BandSelection | None
    model: ArModel | None
    applied: bool
    diagnostics: dict = field(default_factory=dict)


def ase_extrapolate(decon: DeconTrace, threshold_db: float = -6.0, p_max: int | None = None,
                    smoothing_bins: int = 5,
                    clamp_factor: float | None = CLAMP_FACTOR) -> AseResult:
    """Band selection, AIC order, Burg fit, extrapolation and inverse transform.

    When any step cannot proceed the Wiener output is returned unchanged with
    ``applied=False`` and the reason in ``diagnostics["warning"]``.
    """
    n_samples = len(decon)
    try:
        band = select_band(decon.spectrum, threshold_db, smoothing_bins)
        seg = decon.spectrum.bins[band.m:band.n + 1]
        pm = default_p_max(band) if p_max is None else min(int(p_max), default_p_max(band))
        order = select_order_aic(seg, pm)
        model = burg_fit(seg, order)
        ext = extrapolate_spectrum(decon.spectrum, band, model, clamp_factor)
        x = np.fft.ifft(ext.bins)
        residue = check_real(x)
    except (BandTooNarrowError, ValueError, ArithmeticError) as exc:
        log.warning("ASE skipped: %s", exc)
        return AseResult(RfTrace(decon.samples, decon.fs), decon.spectrum, None, None, False,
                         {"warning": str(exc)})
    return AseResult(
        RfTrace(x.real[:n_samples].copy(), decon.fs),
        ext,
        band,
        model,
        True,
        {"order": order, "p_max": pm, "band": (band.m, band.n),
         "clamped_bins": ext.diagnostics["clamped_bins"], "imag_residue": residue},
    )


def ase_broaden(decon: DeconTrace, threshold_db: float = -6.0, p_max: int | None = None,
                smoothing_bins: int = 5) -> RfTrace:
    """Bandwidth-extended time signal; see :func:`ase_extrapolate`."""
    return ase_extrapolate(decon, threshold_db, p_max, smoothing_bins).trace
