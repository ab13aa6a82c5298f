"""Command line: ``tofdecon synth|wavelet|deconv|metrics``.

Exit status 0 on success, 2 for unusable input (missing or malformed
files, invalid configuration), 3 when processing fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import DeconError, MalformedScanError
from ..signal_model import next_pow2
from ..synthetic_bench import ReflectivitySeries, Scenario
from .io import read_scan, write_scan
from .metrics import resolution_metrics, scan_metrics
from .processing import process_scan, scan_wavelets
from .scan import PipelineConfig, ScanSet

log = logging.getLogger("tofdecon")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PROCESSING = 3

ZONED_NOTE = "zoned scope: each zone estimates phase and magnitude independently"


class InputError(Exception):
    """Raised for anything wrong with the files or options the user supplied."""


def _load_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path} is not valid JSON: {exc}") from exc


def _load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        return PipelineConfig.from_dict(_load_json(path, "config"))
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid config {path}: {exc}") from exc


def _load_truth(path) -> ReflectivitySeries | None:
    if path is None:
        return None
    try:
        return ReflectivitySeries.from_dict(_load_json(path, "truth"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid truth {path}: {exc}") from exc


def _load_scan(path) -> ScanSet:
    try:
        return read_scan(path)
    except OSError as exc:
        raise InputError(f"cannot read scan {path}: {exc.strerror}") from exc
    except MalformedScanError as exc:
        raise InputError(f"malformed scan {path}: {exc}") from exc


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def cmd_synth(args) -> int:
    d = _load_json(args.scenario, "scenario")
    try:
        sc = Scenario.from_dict(d)
        traces = [sc.trace(i) for i in range(sc.traces)]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid scenario {args.scenario}: {exc}") from exc
    scan = ScanSet.from_traces(traces, kind=sc.kind)
    write_scan(args.out, scan)
    log.info("wrote %d x %d scan to %s", scan.n_traces, scan.n_samples, args.out)
    return EXIT_OK


def write_wavelets_csv(path, fs, wavelets):
    """One row per (trace, zone): trace, zone, phase_deg, center, samples..."""
    rows = [f"# fs={fs!r} columns=trace,zone,phase_deg,center,samples"]
    for i, ws in enumerate(wavelets):
        for z, w in enumerate(ws):
            vals = ",".join(repr(float(v)) for v in w.samples)
            rows.append(f"{i},{z},{float(np.rad2deg(w.phase))!r},{w.center},{vals}")
    Path(path).write_text("\n".join(rows) + "\n")


def cmd_wavelet(args) -> int:
    cfg = _load_config(args.config)
    scan = _load_scan(args.inp)
    ws = scan_wavelets(scan, cfg, args.workers)
    write_wavelets_csv(args.out_wavelets, scan.fs, ws)
    return EXIT_OK


def _envelope_path(out) -> Path:
    p = Path(out)
    return p.with_name(p.stem + "_envelope" + p.suffix)


def emit_plots(directory, result):
    """Per-trace CSVs behind time-domain and spectrum figures."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    scan = result.scan
    n = scan.n_samples
    t = np.arange(n) / scan.fs
    nfft = next_pow2(n)
    f = np.arange(nfft // 2 + 1) * scan.fs / nfft
    for i in range(scan.n_traces):
        raw = scan.samples[i]
        cols = np.column_stack([t, raw, result.wiener[i], result.broadened[i], result.envelope[i]])
        np.savetxt(d / f"trace_{i:04d}_time.csv", cols, delimiter=",",
                   header="t,raw,wiener,broadened,envelope", comments="")
        spec = [np.abs(np.fft.rfft(x, nfft)) for x in (raw, result.wiener[i], result.broadened[i])]
        np.savetxt(d / f"trace_{i:04d}_spectrum.csv", np.column_stack([f, *spec]), delimiter=",",
                   header="f,S_abs,R_wiener_abs,R_ase_abs", comments="")


def cmd_deconv(args) -> int:
    cfg = _load_config(args.config)
    truth = _load_truth(args.truth)
    scan = _load_scan(args.inp)
    if truth is not None and truth.length != scan.n_samples:
        raise InputError(f"truth length {truth.length} differs from {scan.n_samples} samples per trace")
    result = process_scan(scan, cfg, args.workers)
    write_scan(args.out, result.output("broadened"))
    if cfg.emit_envelope:
        write_scan(_envelope_path(args.out), result.output("envelope"))
    report = resolution_metrics(result, truth).to_dict()
    report["processing"] = {"config": cfg.to_dict(), "traces": result.diagnostics}
    if cfg.scope.strategy == "zoned":
        report["processing"]["note"] = ZONED_NOTE
    _dump(args.report, report)
    if args.emit_plots:
        emit_plots(args.emit_plots, result)
    return EXIT_OK


def cmd_metrics(args) -> int:
    truth = _load_truth(args.truth)
    scan = _load_scan(args.inp)
    if truth.length != scan.n_samples:
        raise InputError(f"truth length {truth.length} differs from {scan.n_samples} samples per trace")
    _dump(args.report, scan_metrics(scan.samples, truth).to_dict())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tofdecon", description="Blind deconvolution of ultrasonic scans")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="render a scenario JSON into a scan file")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("wavelet", help="estimate wavelets only")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--config")
    s.add_argument("--out-wavelets", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_wavelet)

    s = sub.add_parser("deconv", help="full chain: wavelet, Wiener, ASE, envelope")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--truth")
    s.add_argument("--emit-plots", metavar="DIR")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_deconv)

    s = sub.add_parser("metrics", help="peak and resolution report on a processed scan")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DeconError, ValueError, ArithmeticError) as exc:
        print(f"processing error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
