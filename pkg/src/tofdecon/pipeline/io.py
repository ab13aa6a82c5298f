"""Scan files: the UTS1 binary container and a plain CSV layout.

UTS1 (little-endian)::

    b"UTS1" | u32 version=1 | u32 trace_count | u32 samples_per_trace
    | f64 sample_rate_hz | u8 kind (0 tofd_bscan, 1 sscan)
    | trace_count x f64 axis | trace_count*samples_per_trace x f32 samples

Samples are stored as float32 in both formats, so a write/read cycle
quantizes float64 input once; after that round trips are exact.  The CSV
writes each float32 with its shortest round-tripping decimal form, which is
why both encodings parse to the same :class:`ScanSet`.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import MalformedScanError
from .scan import SCAN_KINDS, ScanSet

MAGIC = b"UTS1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdB")
KIND_CODES = {k: i for i, k in enumerate(SCAN_KINDS)}


def quantize(samples) -> np.ndarray:
    """The float64 values a scan holds after being stored."""
    return np.asarray(samples, dtype=np.float32).astype(np.float64)


def encode_uts1(scan: ScanSet) -> bytes:
    head = _HEADER.pack(MAGIC, VERSION, scan.n_traces, scan.n_samples, scan.fs, KIND_CODES[scan.kind])
    axis = np.asarray(scan.axis, dtype="<f8").tobytes()
    data = np.asarray(scan.samples, dtype="<f4").tobytes()
    return head + axis + data


def decode_uts1(buf: bytes) -> ScanSet:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise MalformedScanError("magic", f"expected {MAGIC!r}, got {bytes(buf[:4])!r}")
    if len(buf) < _HEADER.size:
        raise MalformedScanError("header", f"{len(buf)} bytes, header needs {_HEADER.size}")
    _, version, ntr, ns, fs, kind = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise MalformedScanError("version", f"unsupported version {version}")
    if ntr < 1 or ns < 2:
        raise MalformedScanError("dimensions", f"{ntr} traces x {ns} samples")
    if not (np.isfinite(fs) and fs > 0):
        raise MalformedScanError("sample_rate", f"invalid sample rate {fs}")
    if kind >= len(SCAN_KINDS):
        raise MalformedScanError("kind", f"unknown kind code {kind}")
    off = _HEADER.size
    need = off + 8 * ntr + 4 * ntr * ns
    if len(buf) < off + 8 * ntr:
        raise MalformedScanError("axis", f"file ends after {len(buf)} bytes, axis needs {8 * ntr}")
    if len(buf) < need:
        raise MalformedScanError("samples", f"expected {need} bytes, file has {len(buf)}")
    if len(buf) > need:
        raise MalformedScanError("samples", f"{len(buf) - need} trailing bytes after the last trace")
    axis = np.frombuffer(buf, dtype="<f8", count=ntr, offset=off).astype(np.float64)
    data = np.frombuffer(buf, dtype="<f4", count=ntr * ns, offset=off + 8 * ntr)
    data = data.astype(np.float64).reshape(ntr, ns)
    try:
        return ScanSet(data, fs, SCAN_KINDS[kind], axis)
    except ValueError as exc:
        raise MalformedScanError("samples", str(exc)) from exc


def write_uts1(path, scan: ScanSet):
    Path(path).write_bytes(encode_uts1(scan))


def read_uts1(path) -> ScanSet:
    return decode_uts1(Path(path).read_bytes())


def write_csv(path, scan: ScanSet):
    rows = [f"# fs={scan.fs!r} kind={scan.kind}"]
    q = np.asarray(scan.samples, dtype=np.float32)
    for a, row in zip(scan.axis, q):
        rows.append(",".join([repr(float(a))] + [str(v) for v in row]))
    Path(path).write_text("\n".join(rows) + "\n")


def _parse_header(line: str) -> tuple[float, str]:
    if not line.startswith("#"):
        raise MalformedScanError("header", "first line must be '# fs=<Hz> kind=<kind>'")
    fields = {}
    for tok in line[1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise MalformedScanError("header", f"bad token {tok!r}")
        fields[key] = val
    if "fs" not in fields:
        raise MalformedScanError("fs", "missing fs in header")
    try:
        fs = float(fields["fs"])
    except ValueError:
        raise MalformedScanError("fs", f"not a number: {fields['fs']!r}") from None
    if not (np.isfinite(fs) and fs > 0):
        raise MalformedScanError("fs", f"invalid sample rate {fs}")
    kind = fields.get("kind", "tofd_bscan")
    if kind not in SCAN_KINDS:
        raise MalformedScanError("kind", f"unknown kind {kind!r}")
    return fs, kind


def read_csv(path) -> ScanSet:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise MalformedScanError("header", "empty file")
    fs, kind = _parse_header(lines[0])
    if len(lines) < 2:
        raise MalformedScanError("samples", "no traces")
    axis, rows = [], []
    for i, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise MalformedScanError("samples", f"row {i} has a non-numeric cell") from None
        if rows and len(vals) - 1 != len(rows[0]):
            raise MalformedScanError("samples", f"row {i} has {len(vals) - 1} samples, row 0 has {len(rows[0])}")
        axis.append(vals[0])
        rows.append(vals[1:])
    if len(rows[0]) < 2:
        raise MalformedScanError("samples", "traces need at least 2 samples")
    try:
        return ScanSet(quantize(rows), fs, kind, np.array(axis))
    except ValueError as exc:
        raise MalformedScanError("samples", str(exc)) from exc


def _is_csv(path) -> bool:
    return Path(path).suffix.lower() == ".csv"


def read_scan(path) -> ScanSet:
    """Read a scan; ``.csv`` files use the CSV layout, anything else UTS1."""
    return read_csv(path) if _is_csv(path) else read_uts1(path)


def write_scan(path, scan: ScanSet):
    if _is_csv(path):
        write_csv(path, scan)
    else:
        write_uts1(path, scan)
