"""Symmetric-matrix estimation and conditioning.

Everything that touches a covariance matrix lives here: estimation from
feature rows, shrinkage toward average-variance structure, correlation
normalization, the diagonal-only variant, SPD factorization, and the two
merge rules used by incremental and domain-incremental updates.

Matrices move through an explicit conditioning pipeline::

    raw --shrink--> shrunk --normalize_correlation--> normalized

Operations reject inputs at the wrong stage rather than silently
reordering, because the two conditioning steps do not commute.

All arithmetic is float64. Symmetry is enforced structurally: every
``CovarianceMatrix`` mirrors its lower triangle on construction, so
``entries[i, j] == entries[j, i]`` holds exactly, not just within
tolerance.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from fecam.errors import ConditioningError, DataError, StageError


class Stage(enum.Enum):
    """Position of a matrix in the conditioning pipeline."""

    RAW = "raw"
    SHRUNK = "shrunk"
    NORMALIZED = "normalized"


_STAGE_ORDER = {Stage.RAW: 0, Stage.SHRUNK: 1, Stage.NORMALIZED: 2}


def _mirror_lower(entries: np.ndarray) -> np.ndarray:
    """Return a matrix whose upper triangle is a copy of the lower one."""
    lower = np.tril(entries)
    out = lower + np.tril(entries, -1).T
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class CovarianceMatrix:
    """A symmetric D x D matrix tagged with its conditioning stage.

    Attributes:
        dim: Number of feature dimensions D.
        entries: The full symmetric matrix (float64, read-only).
        stage: Where this matrix sits in the conditioning pipeline.
        source_count: Number of feature rows that went into the estimate.
    """

    dim: int
    entries: np.ndarray
    stage: Stage
    source_count: int

    @classmethod
    def from_dense(
        cls, entries: np.ndarray, stage: Stage, source_count: int
    ) -> CovarianceMatrix:
        """Build from a dense near-symmetric matrix, mirroring the lower triangle."""
        m = np.asarray(entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DataError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DataError("covariance entries must be finite")
        return cls(
            dim=m.shape[0],
            entries=_mirror_lower(m),
            stage=stage,
            source_count=int(source_count),
        )

    def require_stage(self, *stages: Stage) -> None:
        if self.stage not in stages:
            wanted = " or ".join(s.value for s in stages)
            raise StageError(
                f"operation requires a {wanted} matrix, got {self.stage.value}"
            )

    def packed_lower(self) -> np.ndarray:
        """The lower triangle row by row, D(D+1)/2 values."""
        i, j = np.tril_indices(self.dim)
        return self.entries[i, j]

    @classmethod
    def from_packed_lower(
        cls, packed: np.ndarray, dim: int, stage: Stage, source_count: int
    ) -> CovarianceMatrix:
        packed = np.asarray(packed, dtype=np.float64)
        expected = dim * (dim + 1) // 2
        if packed.shape != (expected,):
            raise DataError(
                f"packed triangle for dim {dim} needs {expected} values, "
                f"got {packed.shape}"
            )
        m = np.zeros((dim, dim))
        i, j = np.tril_indices(dim)
        m[i, j] = packed
        return cls.from_dense(m, stage, source_count)


@dataclass(frozen=True)
class PrecisionMatrix:
    """Cholesky factor of a conditioned covariance, used as the distance kernel.

    The factor L satisfies ``L @ L.T == cov``. Distances and solves go
    through triangular solves with L (or through L's triangular inverse for
    large query batches); the dense inverse of the covariance is never
    formed.

    Attributes:
        dim: Matrix dimension D.
        factor: Lower-triangular Cholesky factor (read-only).
        log_det: Log-determinant of the covariance, for diagnostics and the
            optional density-corrected scoring mode.
    """

    dim: int
    factor: np.ndarray
    log_det: float

    def solve(self, v: np.ndarray) -> np.ndarray:
        """Apply the inverse covariance to a vector via two triangular solves."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise DataError(f"expected vector of length {self.dim}, got {v.shape}")
        half = scipy.linalg.solve_triangular(
            self.factor, v, lower=True, check_finite=False
        )
        return scipy.linalg.solve_triangular(
            self.factor, half, lower=True, trans="T", check_finite=False
        )

    def whiten(self, diffs: np.ndarray) -> np.ndarray:
        """Map difference vectors x - mu to z with ||z||^2 = squared distance.

        Accepts a single vector or an (m, D) batch; returns the same shape.
        """
        diffs = np.asarray(diffs, dtype=np.float64)
        single = diffs.ndim == 1
        rows = diffs[None, :] if single else diffs
        if rows.shape[1] != self.dim:
            raise DataError(
                f"expected vectors of length {self.dim}, got {rows.shape[1]}"
            )
        z = scipy.linalg.solve_triangular(
            self.factor, rows.T, lower=True, check_finite=False
        ).T
        return z[0] if single else z

    @functools.cached_property
    def whitener(self) -> np.ndarray:
        """Triangular inverse of the factor, for batched distance kernels.

        Applying this matrix is algebraically identical to `whiten` but lets
        large batches go through a plain triangular matrix multiply. Computed
        once per precision and cached.
        """
        w = scipy.linalg.solve_triangular(
            self.factor, np.eye(self.dim), lower=True, check_finite=False
        )
        w.flags.writeable = False
        return w

    @functools.cached_property
    def whitener32(self) -> np.ndarray:
        """Single-precision copy of the whitener, for screening passes."""
        w = self.whitener.astype(np.float32)
        w.flags.writeable = False
        return w


@dataclass(frozen=True)
class DiagonalModel:
    """Variance-only covariance summary, normalized by the variance-vector norm.

    Attributes:
        dim: Number of dimensions.
        variances: Nonnegative length-D vector; the raw diagonal divided by
            its Euclidean norm.
        norm: The Euclidean norm of the raw diagonal, kept so the raw
            variances can be recovered exactly.
    """

    dim: int
    variances: np.ndarray
    norm: float


def estimate_covariance(
    features: np.ndarray, mean: np.ndarray, *, unbiased: bool = False
) -> CovarianceMatrix:
    """Estimate a covariance matrix about a given mean vector.

    Args:
        features: (n, D) matrix of feature rows.
        mean: Length-D center; entry (i, j) of the result is the average of
            (x_k[i] - mean[i]) * (x_k[j] - mean[j]) over rows k.
        unbiased: Divide by n - 1 instead of n. The default is the
            maximum-likelihood population form.

    Returns:
        A raw-stage CovarianceMatrix with source_count = n.

    Raises:
        DataError: On dimension mismatch, non-finite input, or n too small
            for the requested divisor.
    """
    x = np.asarray(features, dtype=np.float64)
    mu = np.asarray(mean, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"features must be a 2-D matrix, got shape {x.shape}")
    n, d = x.shape
    if n < 1:
        raise DataError("need at least one feature row")
    if mu.shape != (d,):
        raise DataError(f"mean has shape {mu.shape}, expected ({d},)")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(mu))):
        raise DataError("features and mean must be finite")
    divisor = n - 1 if unbiased else n
    if divisor < 1:
        raise DataError("unbiased estimation needs at least two rows")
    centered = x - mu
    cov = centered.T @ centered / divisor
    return CovarianceMatrix.from_dense(cov, Stage.RAW, source_count=n)


def shrink(cov: CovarianceMatrix, gamma1: float, gamma2: float) -> CovarianceMatrix:
    """Regularize a raw covariance toward average-variance structure.

    Adds gamma1 * V1 on the diagonal and gamma2 * V2 off it, where V1 is the
    mean diagonal entry and V2 the mean over the D(D-1) off-diagonal slots
    (zero when D == 1). This is what makes rank-deficient estimates (fewer
    rows than dimensions) invertible.

    Raises:
        DataError: If either gamma is negative.
        StageError: If the input is not raw.
        ConditioningError: If gamma1 > 0 but the average variance is zero,
            which means the data carried no variance at all; proceeding
            would only defer the failure to factorization.
    """
    if gamma1 < 0 or gamma2 < 0:
        raise DataError(f"shrinkage weights must be nonnegative, got ({gamma1}, {gamma2})")
    cov.require_stage(Stage.RAW)
    d = cov.dim
    v1 = float(np.trace(cov.entries)) / d
    if d > 1:
        v2 = float(cov.entries.sum() - np.trace(cov.entries)) / (d * (d - 1))
    else:
        v2 = 0.0
    if gamma1 > 0 and v1 == 0.0:
        raise ConditioningError(
            "average variance is zero; the data is degenerate and shrinkage "
            "cannot produce an invertible matrix"
        )
    eye = np.eye(d)
    shrunk = cov.entries + gamma1 * v1 * eye + gamma2 * v2 * (1.0 - eye)
    return CovarianceMatrix.from_dense(shrunk, Stage.SHRUNK, cov.source_count)


def normalize_correlation(cov: CovarianceMatrix) -> CovarianceMatrix:
    """Rescale a shrunk covariance so its diagonal becomes 1.

    Entry (i, j) is divided by sqrt(cov[i, i]) * sqrt(cov[j, j]), putting
    every class's matrix on a common scale so distances computed against
    different classes are comparable.

    Raises:
        StageError: If the input is not shrunk; normalization before
            shrinkage is rejected because the steps do not commute.
        ConditioningError: If any diagonal entry is nonpositive, naming the
            first offending dimension.
    """
    cov.require_stage(Stage.SHRUNK)
    diag = np.diag(cov.entries)
    bad = np.flatnonzero(diag <= 0)
    if bad.size:
        raise ConditioningError(
            f"dimension {bad[0]} has nonpositive variance {diag[bad[0]]:.6g}; "
            "cannot normalize"
        )
    sigma = np.sqrt(diag)
    normalized = cov.entries / np.outer(sigma, sigma)
    return CovarianceMatrix.from_dense(normalized, Stage.NORMALIZED, cov.source_count)


def invert_spd(cov: CovarianceMatrix) -> PrecisionMatrix:
    """Factorize a conditioned covariance for use as a distance kernel.

    Accepts shrunk or normalized matrices (raw ones are rejected: an
    unconditioned estimate is exactly the thing that tends not to be
    positive definite).

    Raises:
        ConditioningError: If the matrix is not positive definite. The
            error does not regularize and retry; the caller should apply
            (stronger) shrinkage instead.
    """
    cov.require_stage(Stage.SHRUNK, Stage.NORMALIZED)
    try:
        factor = scipy.linalg.cholesky(cov.entries, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ConditioningError(
            "matrix is not positive definite; apply shrinkage (or increase "
            "gamma1/gamma2) before inverting"
        ) from exc
    factor.flags.writeable = False
    log_det = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return PrecisionMatrix(dim=cov.dim, factor=factor, log_det=log_det)


def normalize_diagonal(cov: CovarianceMatrix) -> DiagonalModel:
    """Reduce a shrunk covariance to its diagonal, scaled to unit norm.

    Raises:
        StageError: If the input is not shrunk.
        ConditioningError: If the diagonal is entirely zero.
    """
    cov.require_stage(Stage.SHRUNK)
    diag = np.diag(cov.entries).copy()
    norm = float(np.linalg.norm(diag))
    if norm == 0.0:
        raise ConditioningError("diagonal norm is zero; nothing to normalize")
    variances = diag / norm
    variances.flags.writeable = False
    return DiagonalModel(dim=cov.dim, variances=variances, norm=norm)


def merge_common(
    prev: CovarianceMatrix | None,
    n_classes_prev: int,
    task_cov: CovarianceMatrix,
    n_classes_total: int,
) -> CovarianceMatrix:
    """Fold a task's mean covariance into the running all-classes mean.

    The running matrix after the merge is
    ``prev * (n_prev / n_total) + task * ((n_total - n_prev) / n_total)``,
    i.e. the class-count-weighted mean. With ``n_classes_prev == 0`` the
    task matrix is returned verbatim.

    Raises:
        DataError: On a class-count regression or dimension mismatch.
        StageError: If either matrix is not raw (merging conditioned
            matrices would average incomparable scales).
    """
    if n_classes_prev == 0:
        task_cov.require_stage(Stage.RAW)
        if n_classes_total <= 0:
            raise DataError("total class count must be positive")
        return task_cov
    if prev is None:
        raise DataError("previous matrix required when n_classes_prev > 0")
    if n_classes_total <= n_classes_prev:
        raise DataError(
            f"class count must grow: prev {n_classes_prev}, total {n_classes_total}"
        )
    prev.require_stage(Stage.RAW)
    task_cov.require_stage(Stage.RAW)
    if prev.dim != task_cov.dim:
        raise DataError(f"dimension mismatch: {prev.dim} vs {task_cov.dim}")
    w_prev = n_classes_prev / n_classes_total
    w_task = (n_classes_total - n_classes_prev) / n_classes_total
    merged = prev.entries * w_prev + task_cov.entries * w_task
    return CovarianceMatrix.from_dense(
        merged, Stage.RAW, prev.source_count + task_cov.source_count
    )


def average_domain(
    prev: CovarianceMatrix, curr: CovarianceMatrix
) -> CovarianceMatrix:
    """Average two raw covariances elementwise (domain-shift update rule)."""
    if prev.dim != curr.dim:
        raise DataError(f"dimension mismatch: {prev.dim} vs {curr.dim}")
    if prev.stage != curr.stage:
        raise StageError(
            f"stage mismatch: {prev.stage.value} vs {curr.stage.value}"
        )
    prev.require_stage(Stage.RAW)
    averaged = 0.5 * (prev.entries + curr.entries)
    return CovarianceMatrix.from_dense(
        averaged, Stage.RAW, prev.source_count + curr.source_count
    )


def squared_mahalanobis(
    x: np.ndarray, proto: np.ndarray, precision: PrecisionMatrix
) -> float:
    """Squared distance (x - proto)' C^-1 (x - proto) via the stored factor."""
    x = np.asarray(x, dtype=np.float64)
    proto = np.asarray(proto, dtype=np.float64)
    if x.shape != (precision.dim,) or proto.shape != (precision.dim,):
        raise DataError(
            f"expected vectors of length {precision.dim}, "
            f"got {x.shape} and {proto.shape}"
        )
    z = precision.whiten(x - proto)
    return float(z @ z)


def reconstruction_error(cov: CovarianceMatrix, precision: PrecisionMatrix) -> float:
    """Relative Frobenius error of factor @ factor.T against the matrix."""
    rebuilt = precision.factor @ precision.factor.T
    denom = float(np.linalg.norm(cov.entries))
    if denom == 0.0:
        return float(np.linalg.norm(rebuilt))
    return float(np.linalg.norm(rebuilt - cov.entries)) / denom


def log_det_diagonal(model: DiagonalModel) -> float:
    """Log-determinant of the normalized diagonal covariance."""
    if np.any(model.variances <= 0):
        raise ConditioningError("diagonal model has nonpositive variances")
    return float(np.sum(np.log(model.variances)))


def is_exactly_symmetric(entries: np.ndarray) -> bool:
    return bool(np.array_equal(entries, entries.T))


def triangular_byte_size(dim: int) -> int:
    """On-disk size of one matrix stored as its f32 lower triangle."""
    return dim * (dim + 1) // 2 * 4


MANY_SHOT_GAMMAS = (1.0, 1.0)
FEW_SHOT_GAMMAS = (100.0, 100.0)


def _check_finite_vector(v: np.ndarray, name: str, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (dim,):
        raise DataError(f"{name} has shape {v.shape}, expected ({dim},)")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name} must be finite")
    return v


def mahalanobis_log_density(
    x: np.ndarray, mean: np.ndarray, precision: PrecisionMatrix
) -> float:
    """Exact multivariate normal log-density using the cached factor."""
    d = precision.dim
    x = _check_finite_vector(x, "x", d)
    mean = _check_finite_vector(mean, "mean", d)
    dist = squared_mahalanobis(x, mean, precision)
    return -0.5 * (dist + precision.log_det + d * math.log(2.0 * math.pi))
