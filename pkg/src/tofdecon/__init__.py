"""Blind deconvolution of ultrasonic RF traces.

Estimate the pulse from trace statistics (kurtosis-maximizing phase, acf
magnitude), remove it with a regularized Wiener filter and widen the
recovered band by autoregressive spectral extrapolation.
"""

from .errors import (
    BandTooNarrowError,
    DeconError,
    EstimationFailedError,
    InvalidTraceError,
    MalformedScanError,
    StageError,
    UndefinedKurtosisError,
)
from .signal_model import (
    AnalyticTrace,
    Autocorrelation,
    RfTrace,
    Spectrum,
    amplitude_spectrum_from_acf,
    analytic_signal,
    autocorrelation,
    envelope,
    hilbert_transform,
    phase_rotate,
)
from .spectral_extrapolation import (
    ArModel,
    BandSelection,
    ase_broaden,
    ase_extrapolate,
    burg_fit,
    extrapolate_spectrum,
    select_band,
    select_order_aic,
)
from .synthetic_bench import (
    NoiseSpec,
    PulseSpec,
    ReflectivitySeries,
    Scenario,
    canonical_scenario,
    make_pulse,
    synthesize_rf,
)
from .wavelet_estimation import KurtosisCurve, WaveletEstimate, estimate_phase, estimate_wavelet, excess_kurtosis
from .wiener_deconv import DeconTrace, WienerConfig, wiener_deconvolve

__version__ = "0.1.0"
