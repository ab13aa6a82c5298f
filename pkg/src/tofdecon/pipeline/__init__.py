"""Scan-level processing, metrics, file formats and the command line."""

from .io import read_scan, write_scan
from .metrics import ResolutionReport, resolution_metrics, scan_metrics, write_report
from .processing import ScanResult, TraceProducts, deconvolve_trace, pooled_wavelet, process_scan, scan_wavelets
from .scan import PipelineConfig, ScanSet, WaveletScope

__all__ = [
    "PipelineConfig", "ResolutionReport", "ScanResult", "ScanSet", "TraceProducts", "WaveletScope",
    "deconvolve_trace", "pooled_wavelet", "process_scan", "read_scan", "resolution_metrics",
    "scan_metrics", "scan_wavelets", "write_report", "write_scan",
]
