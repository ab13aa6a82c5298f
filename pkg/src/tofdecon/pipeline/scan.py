"""Scan container and pipeline configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..signal_model import RfTrace

SCAN_KINDS = ("tofd_bscan", "sscan")
STRATEGIES = ("per_trace", "global", "zoned")


@dataclass(frozen=True, eq=False)
class ScanSet:
    """Stack of equally sampled traces, one row per A-scan.

    ``axis`` holds the scan position in mm (B-scan) or the beam angle in
    degrees (S-scan) of each row.
    """

    samples: np.ndarray
    fs: float
    kind: str = "tofd_bscan"
    axis: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 2:
            raise ValueError(f"scan samples must be (traces, samples), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("scan contains non-finite samples")
        if not self.fs > 0:
            raise ValueError("sampling rate must be positive")
        if self.kind not in SCAN_KINDS:
            raise ValueError(f"kind must be one of {SCAN_KINDS}, got {self.kind!r}")
        axis = np.arange(x.shape[0], dtype=np.float64) if self.axis is None else \
            np.asarray(self.axis, dtype=np.float64)
        if axis.shape != (x.shape[0],):
            raise ValueError(f"axis has {axis.size} entries for {x.shape[0]} traces")
        object.__setattr__(self, "samples", np.ascontiguousarray(x))
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "fs", float(self.fs))

    @classmethod
    def from_traces(cls, traces, kind="tofd_bscan", axis=None) -> "ScanSet":
        traces = list(traces)
        if not traces:
            raise ValueError("empty scan")
        fs = traces[0].fs
        n = len(traces[0])
        for i, t in enumerate(traces):
            if t.fs != fs or len(t) != n:
                raise ValueError(f"trace {i} differs in fs or length from trace 0")
        return cls(np.stack([t.samples for t in traces]), fs, kind, axis)

    @property
    def n_traces(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def trace(self, i: int) -> RfTrace:
        return RfTrace(self.samples[i], self.fs)

    @property
    def traces(self) -> list[RfTrace]:
        return [self.trace(i) for i in range(self.n_traces)]

    def __len__(self):
        return self.n_traces

    def with_samples(self, samples) -> "ScanSet":
        return ScanSet(samples, self.fs, self.kind, self.axis)


@dataclass(frozen=True)
class WaveletScope:
    """Which traces and samples share a wavelet.

    ``zoned`` splits every trace at ``zone_boundaries`` and pools statistics
    per zone across the scan.  An empty boundary list makes it identical to
    ``global``.
    """

    strategy: str = "per_trace"
    zone_boundaries: tuple = ()

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        b = tuple(int(v) for v in self.zone_boundaries)
        object.__setattr__(self, "zone_boundaries", b)
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError(f"zone boundaries must be strictly increasing: {b}")
        if b and b[0] <= 0:
            raise ValueError("zone boundaries must be positive sample indices")
        if b and self.strategy != "zoned":
            raise ValueError("zone_boundaries only apply to the zoned strategy")

    def check_length(self, n_samples: int):
        if self.zone_boundaries and self.zone_boundaries[-1] >= n_samples:
            raise ValueError(f"zone boundary {self.zone_boundaries[-1]} outside {n_samples} samples")


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the chain; defaults are the documented conventions."""

    wavelet_length: int | None = None
    grid_step_deg: float = 1.0
    refine_phase: bool = True
    gate: tuple | None = None
    eps_factor: float = 0.01
    noise_variance: float | None = None
    threshold_db: float = -6.0
    p_max: int | None = None
    smoothing_bins: int = 5
    clamp_factor: float | None = 3.0
    scope: WaveletScope = field(default_factory=WaveletScope)
    emit_envelope: bool = False

    def __post_init__(self):
        if self.wavelet_length is not None and (self.wavelet_length < 2 or self.wavelet_length % 2):
            raise ValueError("wavelet_length must be an even integer >= 2")
        if not self.grid_step_deg > 0:
            raise ValueError("grid_step_deg must be positive")
        if not self.eps_factor > 0:
            raise ValueError("eps_factor must be positive")
        if self.p_max is not None and self.p_max < 1:
            raise ValueError("p_max must be >= 1")
        if self.smoothing_bins < 1:
            raise ValueError("smoothing_bins must be >= 1")
        if self.threshold_db >= 0:
            raise ValueError("threshold_db must be negative")
        if self.gate is not None:
            g = tuple(int(v) for v in self.gate)
            if len(g) != 2 or not 0 <= g[0] < g[1]:
                raise ValueError(f"gate must be [start, end) with start < end, got {self.gate}")
            object.__setattr__(self, "gate", g)
        if isinstance(self.scope, dict):
            object.__setattr__(self, "scope", WaveletScope(**self.scope))

    @property
    def grid_step(self) -> float:
        return float(np.deg2rad(self.grid_step_deg))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scope"]["zone_boundaries"] = list(self.scope.zone_boundaries)
        if self.gate is not None:
            d["gate"] = list(self.gate)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "scope" in d and isinstance(d["scope"], dict):
            d["scope"] = WaveletScope(**d["scope"])
        if d.get("gate") is not None:
            d["gate"] = tuple(d["gate"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)
