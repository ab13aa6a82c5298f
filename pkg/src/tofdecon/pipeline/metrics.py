"""Peak picking and resolution figures on envelopes.

Conventions: peaks are envelope local maxima above -20 dB of the global
envelope maximum, at least 3 samples apart.  Two neighbouring peaks are
resolved when the envelope dips at least 3 dB below the lower of the two
between them.  Truth spikes match the nearest unused peak within 4 samples.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import find_peaks

from ..signal_model import RfTrace, envelope
from ..synthetic_bench import ReflectivitySeries

PEAK_THRESHOLD_DB = -20.0
MIN_PEAK_SPACING = 3
RESOLVED_DIP_DB = 3.0
MATCH_TOLERANCE = 4

CONVENTIONS = {
    "peak_threshold_db": PEAK_THRESHOLD_DB,
    "min_peak_spacing_samples": MIN_PEAK_SPACING,
    "resolved_dip_db": RESOLVED_DIP_DB,
    "match_tolerance_samples": MATCH_TOLERANCE,
    "fwhm": "envelope width at half the peak value, linear interpolation",
}


@dataclass
class Peak:
    position: int
    polarity: int
    amplitude: float
    fwhm: float


@dataclass
class Match:
    truth_index: int
    truth_position: int
    truth_polarity: int
    peak_index: int | None
    error: int | None


@dataclass
class PairFlag:
    first: int
    second: int
    separation: int
    dip_db: float | None
    resolved: bool


@dataclass
class StageMetrics:
    peaks: list
    matches: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    mean_fwhm: float | None = None


@dataclass
class TraceReport:
    index: int
    stages: dict


@dataclass
class ResolutionReport:
    traces: list
    aggregate: dict
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def spectral_flatness(bins) -> float:
    """Geometric over arithmetic mean of the power in the bins 0..Nyquist.

    ``bins`` is a full two-sided spectrum (or a :class:`Spectrum`).  1 for a
    white spectrum, towards 0 for a peaked one.
    """
    bins = getattr(bins, "bins", bins)
    p = np.abs(np.asarray(bins)[: len(bins) // 2 + 1]) ** 2
    if not np.any(p > 0):
        raise ValueError("flatness of an all-zero spectrum")
    p = np.maximum(p, np.finfo(float).tiny)
    return float(np.exp(np.mean(np.log(p))) / np.mean(p))


def detect_peaks(env: np.ndarray, threshold_db: float = PEAK_THRESHOLD_DB,
                 min_spacing: int = MIN_PEAK_SPACING) -> np.ndarray:
    top = float(np.max(env)) if env.size else 0.0
    if not top > 0:
        return np.zeros(0, dtype=int)
    idx, _ = find_peaks(env, height=top * 10.0 ** (threshold_db / 20.0), distance=min_spacing)
    return idx


def fwhm(env: np.ndarray, k: int) -> float:
    """Width in samples where the envelope stays above half of ``env[k]``."""
    half = 0.5 * env[k]
    left = float(k)
    i = k
    while i > 0 and env[i - 1] > half:
        i -= 1
    if i > 0:
        left = i - (env[i] - half) / (env[i] - env[i - 1])
    else:
        left = 0.0
    j = k
    n = env.size
    while j < n - 1 and env[j + 1] > half:
        j += 1
    if j < n - 1:
        right = j + (env[j] - half) / (env[j] - env[j + 1])
    else:
        right = float(n - 1)
    return max(1.0, right - left)


def dip_db(env: np.ndarray, a: int, b: int) -> float:
    """Depth of the envelope minimum between two peaks, below the lower one."""
    lo, hi = sorted((a, b))
    top = min(float(env[lo]), float(env[hi]))
    # cap at 300 dB so an exact zero stays JSON-representable
    floor = max(float(np.min(env[lo:hi + 1])), top * 1e-15)
    return float(20.0 * np.log10(top / floor))


def match_truth(peaks: np.ndarray, truth_pos, tol: int = MATCH_TOLERANCE):
    """Greedy nearest matching, closest truth-peak pairs first."""
    cand = []
    for ti, t in enumerate(truth_pos):
        for pi, p in enumerate(peaks):
            d = abs(int(p) - int(t))
            if d <= tol:
                cand.append((d, ti, pi))
    cand.sort()
    used_t, used_p, out = set(), set(), {}
    for d, ti, pi in cand:
        if ti in used_t or pi in used_p:
            continue
        used_t.add(ti)
        used_p.add(pi)
        out[ti] = pi
    return out


def stage_metrics(signed: np.ndarray, env: np.ndarray, truth: ReflectivitySeries | None = None) -> StageMetrics:
    idx = detect_peaks(env)
    peaks = [Peak(int(k), int(np.sign(signed[k])), float(env[k]), fwhm(env, k)) for k in idx]
    if truth is None:
        mean_w = float(np.mean([p.fwhm for p in peaks])) if peaks else None
        pairs = [PairFlag(i, i + 1, int(idx[i + 1] - idx[i]), dip_db(env, idx[i], idx[i + 1]),
                          dip_db(env, idx[i], idx[i + 1]) >= RESOLVED_DIP_DB)
                 for i in range(len(idx) - 1)]
        return StageMetrics(peaks, [], pairs, mean_w)

    pos = truth.sample_positions
    order = np.argsort(pos, kind="stable")
    amps = truth.amplitudes
    assigned = match_truth(idx, pos)
    matches = []
    for ti in range(pos.size):
        pi = assigned.get(ti)
        err = None if pi is None else int(idx[pi] - pos[ti])
        matches.append(Match(ti, int(pos[ti]), int(np.sign(amps[ti])), pi, err))
    pairs = []
    for a, b in zip(order[:-1], order[1:]):
        pa, pb = assigned.get(int(a)), assigned.get(int(b))
        if pa is None or pb is None or pa == pb:
            pairs.append(PairFlag(int(a), int(b), int(pos[b] - pos[a]), None, False))
            continue
        d = dip_db(env, idx[pa], idx[pb])
        pairs.append(PairFlag(int(a), int(b), int(pos[b] - pos[a]), d, d >= RESOLVED_DIP_DB))
    widths = [peaks[m.peak_index].fwhm for m in matches if m.peak_index is not None]
    mean_w = float(np.mean(widths)) if widths else None
    return StageMetrics(peaks, matches, pairs, mean_w)


def trace_report(index: int, stages: dict, truth: ReflectivitySeries | None = None) -> TraceReport:
    """``stages`` maps a stage name to ``(signed_trace, envelope_or_None)``."""
    out = {}
    for name, (signed, env) in stages.items():
        signed = signed.samples if isinstance(signed, RfTrace) else np.asarray(signed)
        if env is None:
            env = envelope(RfTrace(signed, 1.0)).samples
        env = env.samples if isinstance(env, RfTrace) else np.asarray(env)
        if env.size == 0:
            raise ValueError("empty envelope")
        out[name] = stage_metrics(signed, env, truth)
    return TraceReport(index, out)


def _aggregate(traces: list, final: str, truth) -> dict:
    agg = {"final_stage": final, "mean_fwhm": {}}
    for name in traces[0].stages:
        ws = [t.stages[name].mean_fwhm for t in traces if t.stages[name].mean_fwhm is not None]
        agg["mean_fwhm"][name] = float(np.mean(ws)) if ws else None
    if truth is not None:
        errs = [m.error for t in traces for m in t.stages[final].matches if m.error is not None]
        total = sum(len(t.stages[final].matches) for t in traces)
        agg["position_rmse"] = float(np.sqrt(np.mean(np.square(errs)))) if errs else None
        agg["fraction_detected"] = len(errs) / total if total else 0.0
    return agg


def resolution_metrics(products, truth: ReflectivitySeries | None = None) -> ResolutionReport:
    """Report for one trace's products or a whole :class:`ScanResult`.

    ``products`` may be a mapping with ``raw``, ``wiener``, ``broadened`` and
    optionally ``envelope`` entries, a ``TraceProducts`` or a ``ScanResult``.
    """
    if hasattr(products, "trace_products"):
        items = [products.trace_products(i) for i in range(products.scan.n_traces)]
    elif hasattr(products, "ase"):
        items = [{"raw": products.raw, "wiener": products.wiener.trace,
                  "broadened": products.broadened, "envelope": products.envelope}]
    else:
        items = [products]
    reports = []
    for i, p in enumerate(items):
        stages = {}
        if p.get("raw") is not None:
            stages["raw"] = (p["raw"], None)
        if p.get("wiener") is not None:
            stages["wiener"] = (p["wiener"], None)
        stages["ase"] = (p["broadened"], p.get("envelope"))
        reports.append(trace_report(i, stages, truth))
    return ResolutionReport(reports, _aggregate(reports, "ase", truth))


def scan_metrics(samples: np.ndarray, truth: ReflectivitySeries | None = None) -> ResolutionReport:
    """Report on already processed traces (one ``input`` stage per trace)."""
    reports = [trace_report(i, {"input": (row, None)}, truth) for i, row in enumerate(samples)]
    return ResolutionReport(reports, _aggregate(reports, "input", truth))


def write_report(path, report: ResolutionReport):
    with open(path, "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
