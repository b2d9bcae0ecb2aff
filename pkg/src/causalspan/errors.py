"""Exception taxonomy shared across the package."""


class CausalSpanError(Exception):
    """Base class for all package errors."""


class ConfigError(CausalSpanError):
    """Invalid configuration or command-line usage."""


class InputError(CausalSpanError):
    """Unreadable or malformed input data."""


class DegenerateDataError(InputError):
    """Data unfit for estimation, e.g. a constant column."""


class InsufficientSampleError(InputError):
    """Sample size too small for a requested test or fit."""


class NumericalRankError(CausalSpanError):
    """A matrix required by an estimator is singular or ill-conditioned."""


class ResourceCapError(CausalSpanError):
    """A combinatorial search exceeded its configured cap."""


class NotExtendableError(CausalSpanError):
    """A graph admits no consistent extension to a DAG."""
