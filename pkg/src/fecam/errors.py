"""Exception hierarchy shared across the package."""


class FecamError(Exception):
    """Base class for all library errors."""


class DataError(FecamError):
    """Invalid input data: dimension mismatch, non-finite values, bad labels."""


class ConditioningError(FecamError):
    """A covariance matrix cannot be conditioned or factorized as requested."""


class StageError(ConditioningError):
    """A conditioning operation was applied out of order."""


class FormatError(FecamError):
    """A file does not conform to its declared on-disk format."""


class ProtocolError(FecamError):
    """An evaluation protocol is infeasible or failed mid-run."""


class TrainingError(FecamError):
    """Iterative training diverged (non-finite loss)."""
