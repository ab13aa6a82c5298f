"""Exception hierarchy shared by all stages."""


class DeconError(Exception):
    """Base class for every error raised by tofdecon."""


class InvalidTraceError(DeconError, ValueError):
    """Trace samples or sampling parameters violate the trace contract."""


class UndefinedKurtosisError(DeconError, ValueError):
    """Kurtosis requested for a trace with zero variance."""


class EstimationFailedError(DeconError):
    """Wavelet estimation produced a degenerate result."""


class BandTooNarrowError(DeconError):
    """The detected high-SNR band is too narrow for AR extrapolation."""


class StageError(DeconError):
    """A pipeline stage failed; carries the stage name and trace index."""

    def __init__(self, stage, cause, trace_index=None):
        self.stage = stage
        self.cause = cause
        self.trace_index = trace_index
        where = f" (trace {trace_index})" if trace_index is not None else ""
        super().__init__(f"{stage}{where}: {cause}")


class MalformedScanError(DeconError, ValueError):
    """A scan file could not be parsed; ``field`` names what failed."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
