"""Structured exception types shared across the package."""


class SurkitError(Exception):
    """Base class for all errors raised deliberately by this package."""


class DomainError(SurkitError, ValueError):
    """Argument outside its mathematical domain (non-finite input, sigma <= 0, ...)."""


class InsufficientDataError(SurkitError, ValueError):
    """Too few samples for the requested operation."""


class DegenerateFitError(SurkitError, ValueError):
    """Fit target carries no usable signal (constant samples, flat curve)."""


class UnreachablePercentileError(SurkitError, ValueError):
    """The requested percentile is never attained by the curve."""


class MonotonicityError(SurkitError, ValueError):
    """Curve violates the required monotone ordering."""


class FormatError(SurkitError, ValueError):
    """Malformed input file: bad header, bad magic, truncated payload, duplicate keys."""


class EvaluationError(SurkitError, ValueError):
    """Evaluation dataset is missing pieces required by the pipeline."""


class TrainingError(SurkitError, RuntimeError):
    """Model training diverged or could not produce a usable model."""
