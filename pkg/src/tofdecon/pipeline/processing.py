"""Trace- and scan-level orchestration of estimate -> Wiener -> ASE -> envelope."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ..errors import DeconError, StageError
from ..signal_model import Autocorrelation, RfTrace, envelope
from ..spectral_extrapolation import AseResult, ase_extrapolate
from ..wavelet_estimation import (
    WaveletEstimate,
    curve_from_values,
    dominant_period_acf,
    estimate_wavelet,
    kurtosis_values,
    length_from_period,
    phase_grid,
    statistics_acf,
    wavelet_from_statistics,
)
from ..wiener_deconv import DeconTrace, WienerConfig, wiener_deconvolve
from .scan import PipelineConfig, ScanSet

log = logging.getLogger(__name__)

CROSSFADE = 16


@dataclass(frozen=True, eq=False)
class TraceProducts:
    raw: RfTrace
    wavelet: WaveletEstimate
    wiener: DeconTrace
    ase: AseResult
    envelope: RfTrace

    @property
    def broadened(self) -> RfTrace:
        return self.ase.trace

    @property
    def diagnostics(self) -> dict:
        d = {"phase_deg": float(np.rad2deg(self.wavelet.phase)),
             "wavelet_length": len(self.wavelet),
             "eps": self.wiener.diagnostics["eps"],
             "ase_applied": self.ase.applied}
        d.update({f"ase_{k}": v for k, v in self.ase.diagnostics.items()})
        return d


def _wiener_cfg(cfg: PipelineConfig) -> WienerConfig:
    return WienerConfig(eps_factor=cfg.eps_factor, noise_variance=cfg.noise_variance)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except DeconError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc
    except (ValueError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc


def deconvolve_trace(trace: RfTrace, cfg: PipelineConfig = PipelineConfig(),
                     wavelet: WaveletEstimate | None = None) -> TraceProducts:
    """Run the whole chain on one trace, keeping every intermediate product.

    Pass ``wavelet`` to skip estimation.  Failures are re-raised as
    :class:`StageError` naming the stage; an ASE that cannot proceed falls back
    to the Wiener output instead of failing.
    """
    if wavelet is None:
        wavelet = _stage("wavelet_estimation", estimate_wavelet, trace, cfg.wavelet_length,
                         cfg.grid_step, cfg.gate, cfg.refine_phase)
    wiener = _stage("wiener_deconv", wiener_deconvolve, trace, wavelet, _wiener_cfg(cfg))
    ase = _stage("spectral_extrapolation", ase_extrapolate, wiener, cfg.threshold_db,
                 cfg.p_max, cfg.smoothing_bins, cfg.clamp_factor)
    env = _stage("envelope", envelope, ase.trace)
    return TraceProducts(trace, wavelet, wiener, ase, env)


def pooled_wavelet(traces: list[RfTrace], cfg: PipelineConfig, gate=None) -> WaveletEstimate:
    """One wavelet from autocorrelations and kurtosis curves averaged over traces."""
    angles = phase_grid(cfg.grid_step)
    curves = np.stack([kurtosis_values(t, angles, gate) for t in traces])
    curve = curve_from_values(angles, np.mean(curves, axis=0), cfg.refine_phase)
    n = len(traces[0]) if gate is None else gate[1] - gate[0]
    L = cfg.wavelet_length
    if L is None:
        long = [statistics_acf(t, gate) for t in traces]
        mean_long = Autocorrelation(np.mean(np.stack([a.values for a in long]), axis=0),
                                    long[0].max_lag, long[0].taper, long[0].fs)
        L = length_from_period(dominant_period_acf(mean_long), n)
    if L > n // 4:
        raise ValueError(f"wavelet_length {L} exceeds a quarter of {n} samples")
    acfs = [statistics_acf(t, gate, L) for t in traces]
    acf = Autocorrelation(np.mean(np.stack([a.values for a in acfs]), axis=0),
                          L, acfs[0].taper, acfs[0].fs)
    return wavelet_from_statistics(acf, curve, L)


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Processed scan: stacked outputs plus the wavelets that produced them.

    ``wavelets[i]`` lists the wavelet(s) applied to trace ``i``: one for the
    per-trace and global strategies, one per zone for ``zoned``.
    """

    scan: ScanSet
    wiener: np.ndarray
    broadened: np.ndarray
    envelope: np.ndarray
    wavelets: list
    diagnostics: list = field(default_factory=list)

    def output(self, which: str = "broadened") -> ScanSet:
        return self.scan.with_samples(getattr(self, which))

    def trace_products(self, i: int) -> dict:
        fs = self.scan.fs
        return {"raw": self.scan.trace(i), "wiener": RfTrace(self.wiener[i], fs),
                "broadened": RfTrace(self.broadened[i], fs),
                "envelope": RfTrace(self.envelope[i], fs)}


def _run_one(index, trace, cfg, wavelet=None):
    try:
        return deconvolve_trace(trace, cfg, wavelet)
    except StageError as exc:
        exc.trace_index = index
        exc.args = (f"{exc.stage} (trace {index}): {exc.cause}",)
        raise


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(items) // (4 * workers))
            return list(pool.map(fn, *zip(*items), chunksize=chunk))
    return [fn(*it) for it in items]


def _collect(scan, products, wavelets):
    return ScanResult(
        scan,
        np.stack([p.wiener.samples for p in products]),
        np.stack([p.broadened.samples for p in products]),
        np.stack([p.envelope.samples for p in products]),
        wavelets,
        [p.diagnostics for p in products],
    )


def _crossfade_weights(n: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(np.pi * (np.arange(n) + 0.5) / n))


def _zone_segments(scan: ScanSet, boundaries):
    """``(s0, s1, segments)`` per zone; interior seams overlap by half the crossfade."""
    N = scan.n_samples
    edges = [0, *boundaries, N]
    half = CROSSFADE // 2
    out = []
    for k, (z0, z1) in enumerate(zip(edges[:-1], edges[1:])):
        s0 = z0 - half if k > 0 else z0
        s1 = z1 + half if k < len(edges) - 2 else z1
        if s0 < 0 or s1 > N or s1 - s0 <= CROSSFADE:
            raise ValueError(f"zone [{z0}, {z1}) too short or too close to the trace ends for crossfade")
        segs = [RfTrace(scan.samples[i, s0:s1], scan.fs, s0 / scan.fs) for i in range(scan.n_traces)]
        out.append((s0, s1, segs))
    return out


def _zone_wavelets(scan: ScanSet, cfg: PipelineConfig, boundaries):
    zones = []
    for s0, s1, segs in _zone_segments(scan, boundaries):
        try:
            w = pooled_wavelet(segs, cfg, None if boundaries else cfg.gate)
        except (DeconError, ValueError, ArithmeticError) as exc:
            raise StageError("wavelet_estimation", exc) from exc
        zones.append((s0, s1, segs, w))
    return zones


def _estimate_one(index, trace, cfg):
    try:
        return _stage("wavelet_estimation", estimate_wavelet, trace, cfg.wavelet_length,
                      cfg.grid_step, cfg.gate, cfg.refine_phase)
    except StageError as exc:
        exc.trace_index = index
        exc.args = (f"{exc.stage} (trace {index}): {exc.cause}",)
        raise


def scan_wavelets(scan: ScanSet, cfg: PipelineConfig = PipelineConfig(), workers: int = 1) -> list:
    """Wavelets the configured scope would apply; ``out[i]`` lists those of trace ``i``."""
    scope = cfg.scope
    scope.check_length(scan.n_samples)
    if scope.strategy == "per_trace":
        ws = _map(partial(_estimate_one, cfg=cfg),
                  [(i, scan.trace(i)) for i in range(scan.n_traces)], workers)
        return [[w] for w in ws]
    boundaries = scope.zone_boundaries if scope.strategy == "zoned" else ()
    ws = [z[3] for z in _zone_wavelets(scan, cfg, boundaries)]
    return [list(ws) for _ in range(scan.n_traces)]


def _process_zoned(scan: ScanSet, cfg: PipelineConfig, boundaries, workers) -> ScanResult:
    zones = []
    for s0, s1, segs, w in _zone_wavelets(scan, cfg, boundaries):
        products = _map(partial(_run_one, cfg=cfg, wavelet=w),
                        [(i, t) for i, t in enumerate(segs)], workers)
        zones.append((s0, s1, w, products))

    if not boundaries:
        _, _, w, products = zones[0]
        return _collect(scan, products, [[w] for _ in range(scan.n_traces)])

    wiener = np.zeros(scan.samples.shape)
    broad = np.zeros(scan.samples.shape)
    ramp = _crossfade_weights(CROSSFADE)
    for k, (s0, s1, w, products) in enumerate(zones):
        weight = np.ones(s1 - s0)
        if k > 0:
            weight[:CROSSFADE] = ramp
        if k < len(zones) - 1:
            weight[-CROSSFADE:] = ramp[::-1]
        for i, p in enumerate(products):
            wiener[i, s0:s1] += weight * p.wiener.samples
            broad[i, s0:s1] += weight * p.broadened.samples
    env = np.stack([envelope(RfTrace(b, scan.fs)).samples for b in broad])
    wavelets = [[z[2] for z in zones] for _ in range(scan.n_traces)]
    diags = [{"zones": [z[3][i].diagnostics for z in zones]} for i in range(scan.n_traces)]
    return ScanResult(scan, wiener, broad, env, wavelets, diags)


def process_scan(scan: ScanSet, cfg: PipelineConfig = PipelineConfig(), workers: int = 1) -> ScanResult:
    """Deconvolve every trace of a scan under the configured wavelet scope.

    ``workers > 1`` distributes the per-trace work over processes; results are
    identical to the sequential run because every per-trace step is pure and
    pooled statistics are finished before any trace is deconvolved.
    """
    scope = cfg.scope
    scope.check_length(scan.n_samples)
    if scope.strategy == "per_trace":
        products = _map(partial(_run_one, cfg=cfg),
                        [(i, scan.trace(i)) for i in range(scan.n_traces)], workers)
        return _collect(scan, products, [[p.wavelet] for p in products])
    boundaries = scope.zone_boundaries if scope.strategy == "zoned" else ()
    return _process_zoned(scan, cfg, boundaries, workers)
