"""Exception hierarchy shared by the whole package."""


class StereoComfortError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StereoComfortError):
    """Raster dimensions are missing, zero, or mutually inconsistent."""


class FormatError(StereoComfortError):
    """A file is not in one of the supported formats."""


class DecodeError(StereoComfortError):
    """A file is in a supported format but its payload is malformed."""


class DataError(StereoComfortError):
    """Decoded data violates a value invariant (NaN, Inf, out of range)."""


class ParameterError(StereoComfortError):
    """An operation parameter is outside its documented domain."""


class InputError(StereoComfortError):
    """User-supplied inputs (manifests, CSVs, CLI values) are unusable."""


class ConvergenceError(StereoComfortError):
    """The SVR solver hit its iteration budget before satisfying KKT.

    Carries the last iterate's diagnostics so callers can inspect how far
    the solve got.
    """

    def __init__(self, message, iterations=None, kkt_violation=None):
        super().__init__(message)
        self.iterations = iterations
        self.kkt_violation = kkt_violation


class DegenerateDataError(StereoComfortError):
    """Correlation is undefined (zero variance); RMSE is still available."""

    def __init__(self, message, rmse=None):
        super().__init__(message)
        self.rmse = rmse
