"""Exception hierarchy shared across the package."""


class BartGPError(Exception):
    """Base class for all package-specific failures."""


class DataError(BartGPError):
    """Malformed input data: parse failures, shape mismatches, bad columns."""


class ModelFormatError(BartGPError):
    """A serialized model file is unreadable or has the wrong schema."""


class NumericalError(BartGPError):
    """A numerical routine failed beyond recovery."""


class GPSingularError(NumericalError):
    """A leaf GP covariance stayed singular after jitter escalation."""
