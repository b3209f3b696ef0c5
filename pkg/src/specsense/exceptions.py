"""Exception hierarchy shared by all specsense modules."""


class SpecsenseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(SpecsenseError, ValueError):
    """A call violated a documented precondition."""


class DegenerateInput(SpecsenseError):
    """Input is formally valid but makes the requested statistic undefined
    (zero denominator, log of zero, ...). The ROC harness records these as
    excluded trials instead of propagating them."""


class CalibrationError(SpecsenseError):
    """Calibration could not produce a usable profile (non positive-definite
    covariance, non-positive PSD bin). Re-run with more samples."""


class FormatError(SpecsenseError):
    """A file (IQ capture, profile, config) could not be parsed."""


class ConfigError(SpecsenseError):
    """Invalid or inconsistent run configuration."""
