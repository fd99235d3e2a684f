"""The FeCAM classifier: per-task fitting and distance-based prediction.

A model is a set of class prototypes plus covariance state in one of four
modes:

    per_class   one conditioned covariance per class (the full method)
    common      a single running mean covariance shared by all classes
    diagonal    per-class variances only, norm-scaled
    euclidean   prototypes only, identity metric

Fitting never trains anything: each task contributes class means and
covariance statistics, the covariances are conditioned (shrinkage, then
correlation normalization where applicable) and factorized, and the model
is sealed. Prediction assigns each query to the class whose prototype is
nearest in squared Mahalanobis distance under that class's (or the
shared) precision.

Models are immutable values: ``fit_task`` returns a new model and never
touches its input, so a sealed model is safe to share across concurrent
prediction workers.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from fecam import covariance as cov_ops
from fecam import parallel
from fecam.covariance import (
    CovarianceMatrix,
    DiagonalModel,
    PrecisionMatrix,
    Stage,
    squared_mahalanobis,
)
from fecam.errors import DataError, ProtocolError
from fecam.transform import NegativePolicy, TukeyConfig, tukey, tukey_bypasses

__all__ = [
    "Mode",
    "TransformOrder",
    "FeCAMConfig",
    "ClassModel",
    "FeCAMModel",
    "Prediction",
    "StorageReport",
    "fit_task",
    "predict",
    "predict_euclidean",
    "predict_labels",
    "model_storage_report",
    "from_parameters",
    "squared_mahalanobis",
]


class Mode(enum.Enum):
    PER_CLASS = "per_class"
    COMMON = "common"
    DIAGONAL = "diagonal"
    EUCLIDEAN = "euclidean"


class TransformOrder(enum.Enum):
    """How the scoring prototype relates to the power transform.

    TRANSFORM_MEAN transforms the mean of the raw features (the default);
    MEAN_OF_TRANSFORMED averages the transformed features instead. The two
    coincide only for the identity transform.
    """

    TRANSFORM_MEAN = "transform-mean"
    MEAN_OF_TRANSFORMED = "mean-of-transformed"


@dataclass(frozen=True)
class FeCAMConfig:
    """Everything that parameterizes fitting and scoring."""

    mode: Mode = Mode.PER_CLASS
    tukey: TukeyConfig = field(default_factory=TukeyConfig)
    gamma1: float = 1.0
    gamma2: float = 1.0
    transform_order: TransformOrder = TransformOrder.TRANSFORM_MEAN
    unbiased_covariance: bool = False
    logdet_correction: bool = False


@dataclass(frozen=True)
class ClassModel:
    """Sealed per-class state.

    Attributes:
        class_id: Integer label.
        count: Feature rows seen for this class so far.
        prototype_raw: Mean of the raw (untransformed) feature rows.
        prototype_scored: The prototype actually used in distances.
        covariance: Final conditioned covariance (per-class modes) or None.
        precision: Cached factorization (per_class mode) or None.
        cov_raw: Unconditioned covariance of the transformed features; kept
            in memory so domain updates can re-average it. Not serialized.
        cov_shrunk: Shrunk covariance before normalization; kept so
            true-scale Gaussian sampling remains possible. Not serialized.
    """

    class_id: int
    count: int
    prototype_raw: np.ndarray
    prototype_scored: np.ndarray
    covariance: CovarianceMatrix | DiagonalModel | None = None
    precision: PrecisionMatrix | None = None
    cov_raw: CovarianceMatrix | None = None
    cov_shrunk: CovarianceMatrix | None = None


@dataclass(frozen=True)
class FeCAMModel:
    """An immutable, sealed classifier state.

    ``classes`` maps class_id to its ClassModel in insertion (task) order.
    ``task_log`` records which classes each fit call introduced.
    ``tukey_bypassed`` is set when the first fitted batch contained
    negative values under the bypass policy; from then on neither training
    features nor queries are transformed, keeping the metric consistent.
    """

    config: FeCAMConfig
    dim: int | None = None
    classes: dict[int, ClassModel] = field(default_factory=dict)
    common_cov: CovarianceMatrix | None = None
    common_precision: PrecisionMatrix | None = None
    task_log: tuple[tuple[int, tuple[int, ...]], ...] = ()
    tukey_bypassed: bool = False
    notes: tuple[str, ...] = ()

    @classmethod
    def initial(cls, config: FeCAMConfig | None = None) -> FeCAMModel:
        return cls(config=config or FeCAMConfig())

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def class_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.classes))

    @property
    def transform_active(self) -> bool:
        return self.config.tukey.enabled and not self.tukey_bypassed

    def is_sealed(self) -> bool:
        if not self.classes:
            return False
        mode = self.config.mode
        if mode is Mode.PER_CLASS:
            return all(c.precision is not None for c in self.classes.values())
        if mode is Mode.COMMON:
            return self.common_precision is not None
        if mode is Mode.DIAGONAL:
            return all(
                isinstance(c.covariance, DiagonalModel) for c in self.classes.values()
            )
        return True  # euclidean: prototypes suffice


class DistanceMap(Mapping):
    """Read-only class_id -> squared distance view over one scoring row."""

    __slots__ = ("_ids", "_row")

    def __init__(self, ids: tuple[int, ...], row: np.ndarray):
        self._ids = ids
        self._row = row

    def __getitem__(self, class_id: int) -> float:
        try:
            idx = self._ids.index(class_id)
        except ValueError:
            raise KeyError(class_id) from None
        return float(self._row[idx])

    def __iter__(self):
        return iter(self._ids)

    def __len__(self) -> int:
        return len(self._ids)


@dataclass(frozen=True)
class Prediction:
    """One classified query.

    ``label`` attains the minimum distance; exact ties go to the smallest
    class_id. ``margin`` is the runner-up distance minus the best (inf for
    a single-class model).
    """

    label: int
    distances: DistanceMap
    margin: float


@dataclass(frozen=True)
class StorageReport:
    """Model size accounting: 4-byte floats, covariances as lower triangles."""

    mode: Mode
    dim: int
    n_classes: int
    prototype_bytes: int
    covariance_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.prototype_bytes + self.covariance_bytes


def _validate_features(x: np.ndarray, dim: int | None, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"{what} must be a 2-D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{what} must be finite")
    if dim is not None and x.shape[1] != dim:
        raise DataError(
            f"{what} have dimension {x.shape[1]}, model expects {dim}"
        )
    return x


def _resolve_bypass(model: FeCAMModel, x: np.ndarray) -> bool:
    """Decide the transform state for this batch, consistent with history."""
    cfg = model.config.tukey
    if not cfg.enabled:
        return False
    if model.task_log:
        if model.tukey_bypassed:
            return True
        # Transform already applied to earlier tasks: a batch that cannot be
        # transformed now would make distances incomparable.
        if cfg.lam not in (0.0, 1.0) and x.size and np.min(x) < 0:
            raise DataError(
                "earlier tasks were power-transformed but this batch contains "
                "negative values; the model cannot mix transformed and raw "
                "features"
            )
        return False
    return tukey_bypasses(x, cfg)


def _scored_prototype(
    raw_mean: np.ndarray,
    transformed_rows: np.ndarray,
    config: FeCAMConfig,
    bypassed: bool,
) -> np.ndarray:
    if bypassed or not config.tukey.enabled:
        return raw_mean
    if config.transform_order is TransformOrder.MEAN_OF_TRANSFORMED:
        return transformed_rows.mean(axis=0)
    return tukey(raw_mean, config.tukey)


def _seal_full(
    raw: CovarianceMatrix, config: FeCAMConfig
) -> tuple[CovarianceMatrix, CovarianceMatrix, PrecisionMatrix]:
    """raw -> (shrunk, normalized, precision) for per_class mode."""
    shrunk = cov_ops.shrink(raw, config.gamma1, config.gamma2)
    normalized = cov_ops.normalize_correlation(shrunk)
    precision = cov_ops.invert_spd(normalized)
    return shrunk, normalized, precision


def _seal_diagonal(
    raw: CovarianceMatrix, config: FeCAMConfig
) -> tuple[CovarianceMatrix, DiagonalModel]:
    shrunk = cov_ops.shrink(raw, config.gamma1, config.gamma2)
    return shrunk, cov_ops.normalize_diagonal(shrunk)


def fit_task(
    model: FeCAMModel, features: np.ndarray, labels: np.ndarray
) -> FeCAMModel:
    """Absorb one task's features and return a new sealed model.

    New labels create classes (class-incremental); labels already in the
    model trigger the domain-incremental path, which averages the old and
    new covariance statistics and pools the prototypes by sample count.

    Args:
        features: (n, D) raw feature rows for the task.
        labels: Length-n integer class labels.

    Returns:
        A sealed model. The input model is not modified.

    Raises:
        DataError: Dimension mismatch, non-finite input, or empty task.
    """
    config = model.config
    x = _validate_features(features, model.dim, "features")
    y = np.asarray(labels)
    if y.shape != (x.shape[0],):
        raise DataError(
            f"labels have shape {y.shape}, expected ({x.shape[0]},)"
        )
    if x.shape[0] == 0:
        raise DataError("task contains no rows")
    y = y.astype(np.int64, copy=False)

    bypassed = _resolve_bypass(model, x)
    notes = list(model.notes)
    if bypassed and not model.tukey_bypassed:
        notes.append("tukey transform bypassed: batch contains negative values")

    def do_transform(arr: np.ndarray) -> np.ndarray:
        return arr if bypassed else tukey(arr, config.tukey)

    task_classes = [int(c) for c in np.unique(y)]
    new_ids = [c for c in task_classes if c not in model.classes]
    seen_ids = [c for c in task_classes if c in model.classes]
    if seen_ids and config.mode is Mode.COMMON and new_ids:
        raise DataError(
            "common mode cannot mix new and previously seen classes in one task"
        )

    classes = dict(model.classes)
    task_raw_covs: list[CovarianceMatrix] = []  # common mode, this task's classes

    for cid in task_classes:
        rows = x[y == cid]
        if rows.shape[0] == 0:
            raise DataError(f"class {cid} has zero samples")
        transformed = do_transform(rows)
        raw_mean = rows.mean(axis=0)
        n = rows.shape[0]

        if config.mode is Mode.EUCLIDEAN:
            raw_cov = None
        else:
            raw_cov = cov_ops.estimate_covariance(
                transformed,
                transformed.mean(axis=0),
                unbiased=config.unbiased_covariance,
            )

        if cid in classes:
            old = classes[cid]
            total = old.count + n
            pooled_raw = (old.count * old.prototype_raw + n * raw_mean) / total
            if config.mode is Mode.COMMON:
                task_raw_covs.append(raw_cov)
                merged_raw = None
            elif config.mode is Mode.EUCLIDEAN:
                merged_raw = None
            else:
                if old.cov_raw is None:
                    raise DataError(
                        f"class {cid} has no retained covariance; models "
                        "loaded from disk cannot take domain updates"
                    )
                merged_raw = cov_ops.average_domain(old.cov_raw, raw_cov)
            scored = _pooled_scored_prototype(
                old, pooled_raw, transformed.mean(axis=0), n, config, bypassed
            )
            classes[cid] = _build_class(
                cid, total, pooled_raw, scored, merged_raw, config
            )
        else:
            scored = _scored_prototype(raw_mean, transformed, config, bypassed)
            if config.mode is Mode.COMMON:
                task_raw_covs.append(raw_cov)
                class_raw = None
            elif config.mode is Mode.EUCLIDEAN:
                class_raw = None
            else:
                class_raw = raw_cov
            classes[cid] = _build_class(cid, n, raw_mean, scored, class_raw, config)

    common_cov = model.common_cov
    common_precision = model.common_precision
    if config.mode is Mode.COMMON:
        stack = np.mean([c.entries for c in task_raw_covs], axis=0)
        task_mean = CovarianceMatrix.from_dense(
            stack, Stage.RAW, sum(c.source_count for c in task_raw_covs)
        )
        if new_ids:
            common_cov = cov_ops.merge_common(
                model.common_cov,
                len(model.classes),
                task_mean,
                len(model.classes) + len(new_ids),
            )
        else:
            common_cov = cov_ops.average_domain(model.common_cov, task_mean)
        shrunk = cov_ops.shrink(common_cov, config.gamma1, config.gamma2)
        common_precision = cov_ops.invert_spd(shrunk)
        if not model.task_log:
            notes.append(
                "common mode: shared matrix is shrunk and factorized without "
                "correlation normalization (one matrix, nothing to make "
                "comparable)"
            )

    dim = model.dim if model.dim is not None else x.shape[1]
    task_index = len(model.task_log)
    return replace(
        model,
        dim=dim,
        classes=classes,
        common_cov=common_cov,
        common_precision=common_precision,
        task_log=model.task_log + ((task_index, tuple(task_classes)),),
        tukey_bypassed=model.tukey_bypassed or bypassed,
        notes=tuple(notes),
    )


def _pooled_scored_prototype(
    old: ClassModel,
    pooled_raw: np.ndarray,
    new_transformed_mean: np.ndarray,
    n_new: int,
    config: FeCAMConfig,
    bypassed: bool,
) -> np.ndarray:
    if bypassed or not config.tukey.enabled:
        return pooled_raw
    if config.transform_order is TransformOrder.MEAN_OF_TRANSFORMED:
        total = old.count + n_new
        return (old.count * old.prototype_scored + n_new * new_transformed_mean) / total
    return tukey(pooled_raw, config.tukey)


def _build_class(
    cid: int,
    count: int,
    prototype_raw: np.ndarray,
    prototype_scored: np.ndarray,
    raw_cov: CovarianceMatrix | None,
    config: FeCAMConfig,
) -> ClassModel:
    proto_raw = np.array(prototype_raw, dtype=np.float64)
    proto_raw.flags.writeable = False
    proto_scored = np.array(prototype_scored, dtype=np.float64)
    proto_scored.flags.writeable = False
    if config.mode is Mode.PER_CLASS:
        shrunk, normalized, precision = _seal_full(raw_cov, config)
        return ClassModel(
            cid, count, proto_raw, proto_scored,
            covariance=normalized, precision=precision,
            cov_raw=raw_cov, cov_shrunk=shrunk,
        )
    if config.mode is Mode.DIAGONAL:
        shrunk, diag = _seal_diagonal(raw_cov, config)
        return ClassModel(
            cid, count, proto_raw, proto_scored,
            covariance=diag, cov_raw=raw_cov, cov_shrunk=shrunk,
        )
    # common / euclidean: no per-class covariance state
    return ClassModel(cid, count, proto_raw, proto_scored)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

_BATCH_KERNEL_MIN_ROWS = 1024


def _transform_queries(model: FeCAMModel, queries: np.ndarray) -> np.ndarray:
    if not model.transform_active:
        return queries
    cfg = model.config.tukey
    if cfg.lam not in (0.0, 1.0) and queries.size and np.min(queries) < 0:
        raise DataError(
            "model was fit on power-transformed features but the query batch "
            "contains negative values"
        )
    return tukey(queries, cfg)


def _whitened_distances(
    q: np.ndarray, proto: np.ndarray, precision: PrecisionMatrix
) -> np.ndarray:
    """Squared Mahalanobis distances of every row of q to proto (float64)."""
    z = precision.whiten(q - proto)
    return np.einsum("ij,ij->i", z, z)


def _triangular_mult(qf: np.ndarray, w: np.ndarray) -> np.ndarray:
    """qf @ w.T with w triangular; trmm wants Fortran-order qf."""
    try:
        from scipy.linalg.blas import get_blas_funcs
    except ImportError:  # pragma: no cover
        return qf @ w.T
    (trmm,) = get_blas_funcs(("trmm",), (w, qf))
    return trmm(1.0, w, qf, side=1, lower=1, trans_a=1)


# The f32 screening pass carries a worst-case accumulation error of about
# D * eps32 relative to the magnitude of the expanded terms; queries whose
# top-two gap falls inside 4x that bound are rescored exactly.
_SCREEN_TOL_FACTOR = 4.0 * np.finfo(np.float32).eps


def _per_class_screened(
    model: FeCAMModel, q: np.ndarray, ids: tuple[int, ...], correct: bool
) -> np.ndarray:
    """Large-batch per-class scorer: f32 screen, exact f64 refinement.

    The screen computes every distance with single-precision triangular
    multiplies (half the memory traffic and twice the flop rate of the
    float64 kernel). Any query whose best-vs-runner-up gap is within the
    screen's error bound is rescored against every class in exact float64,
    so returned labels match the pure-float64 path; distances of clearly
    decided queries carry f32-grade (~1e-6 relative) rounding.
    """
    m = q.shape[0]
    qf32 = np.asfortranarray(q, dtype=np.float32)
    out = np.empty((m, len(ids)))
    magnitude = np.zeros(m)
    for k, cid in enumerate(ids):
        cm = model.classes[cid]
        w32 = cm.precision.whitener32
        zq = _triangular_mult(qf32, w32)
        v = w32 @ cm.prototype_scored.astype(np.float32)
        zz = np.einsum("ij,ij->i", zq, zq, dtype=np.float64)
        cross = (zq @ v).astype(np.float64)
        vv = float(v @ v)
        out[:, k] = np.maximum(zz - 2.0 * cross + vv, 0.0)
        np.maximum(magnitude, zz + vv, out=magnitude)
        if correct:
            out[:, k] += cm.precision.log_det

    top_two = np.partition(out, 1, axis=1)
    gap = top_two[:, 1] - top_two[:, 0]
    ambiguous = np.flatnonzero(
        gap <= _SCREEN_TOL_FACTOR * q.shape[1] * (magnitude + 1.0)
    )
    if ambiguous.size:
        for k, cid in enumerate(ids):
            cm = model.classes[cid]
            exact = _whitened_distances(
                q[ambiguous], cm.prototype_scored, cm.precision
            )
            out[ambiguous, k] = exact + (cm.precision.log_det if correct else 0.0)
    return out


def _distance_matrix(
    model: FeCAMModel, q: np.ndarray, *, force_euclidean: bool = False
) -> tuple[tuple[int, ...], np.ndarray]:
    """(class_ids ascending, (m, Y) squared distances), mode dispatched."""
    ids = model.class_ids
    mode = Mode.EUCLIDEAN if force_euclidean else model.config.mode
    m = q.shape[0]
    out = np.empty((m, len(ids)))
    correct = model.config.logdet_correction and not force_euclidean

    if mode is Mode.PER_CLASS:
        if m >= _BATCH_KERNEL_MIN_ROWS:
            out = _per_class_screened(model, q, ids, correct)
        else:
            for k, cid in enumerate(ids):
                cm = model.classes[cid]
                out[:, k] = _whitened_distances(q, cm.prototype_scored, cm.precision)
                if correct:
                    out[:, k] += cm.precision.log_det
    elif mode is Mode.COMMON:
        w = model.common_precision.whitener
        zq = (
            _triangular_mult(np.asfortranarray(q), w)
            if m >= _BATCH_KERNEL_MIN_ROWS
            else q @ w.T
        )
        zq_sq = np.einsum("ij,ij->i", zq, zq)
        for k, cid in enumerate(ids):
            v = w @ model.classes[cid].prototype_scored
            out[:, k] = np.maximum(zq_sq - 2.0 * (zq @ v) + float(v @ v), 0.0)
    elif mode is Mode.DIAGONAL:
        q_sq = q * q
        for k, cid in enumerate(ids):
            cm = model.classes[cid]
            diag: DiagonalModel = cm.covariance
            if np.any(diag.variances <= 0):
                raise DataError(
                    f"class {cid} has a nonpositive variance; cannot score"
                )
            weights = 1.0 / diag.variances
            mu = cm.prototype_scored
            out[:, k] = np.maximum(
                q_sq @ weights - 2.0 * (q @ (weights * mu)) + float(weights @ (mu * mu)),
                0.0,
            )
            if correct:
                out[:, k] += cov_ops.log_det_diagonal(diag)
    else:  # euclidean
        q_sq = np.einsum("ij,ij->i", q, q)
        for k, cid in enumerate(ids):
            mu = model.classes[cid].prototype_scored
            out[:, k] = np.maximum(q_sq - 2.0 * (q @ mu) + float(mu @ mu), 0.0)
    return ids, out


def _predictions_from_matrix(
    ids: tuple[int, ...], dists: np.ndarray
) -> list[Prediction]:
    # Columns are in ascending class_id order, so argmin's first-match rule
    # is exactly the smallest-id tie-break.
    best = np.argmin(dists, axis=1)
    preds = []
    for i, k in enumerate(best):
        row = dists[i]
        if len(ids) > 1:
            runner = np.partition(row, 1)[1]
            margin = float(runner - row[k])
        else:
            margin = math.inf
        preds.append(Prediction(ids[k], DistanceMap(ids, row), margin))
    return preds


def _score(
    model: FeCAMModel, queries: np.ndarray, *, force_euclidean: bool
) -> tuple[tuple[int, ...], np.ndarray]:
    if not model.is_sealed():
        raise ProtocolError("model is not sealed; fit at least one task first")
    q = _validate_features(queries, model.dim, "queries")
    q = _transform_queries(model, q)
    threads = parallel.resolve_threads()
    if threads > 1 and q.shape[0] >= 2 * _BATCH_KERNEL_MIN_ROWS:
        chunks = np.array_split(np.arange(q.shape[0]), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(
                    lambda idx: _distance_matrix(
                        model, q[idx], force_euclidean=force_euclidean
                    )[1],
                    chunks,
                )
            )
        return model.class_ids, np.vstack(parts)
    return _distance_matrix(model, q, force_euclidean=force_euclidean)


def predict(model: FeCAMModel, queries: np.ndarray) -> list[Prediction]:
    """Classify queries under the model's configured metric.

    Queries are run through the model's power transform (unless it was
    bypassed at fit time) and scored against every class; each query gets
    the label of the nearest prototype.
    """
    ids, dists = _score(model, queries, force_euclidean=False)
    return _predictions_from_matrix(ids, dists)


def predict_euclidean(model: FeCAMModel, queries: np.ndarray) -> list[Prediction]:
    """Classify queries by plain squared Euclidean distance to prototypes.

    The nearest-class-mean baseline: identical query transform and
    prototypes, identity metric, no covariance used.
    """
    ids, dists = _score(model, queries, force_euclidean=True)
    return _predictions_from_matrix(ids, dists)


def predict_labels(
    model: FeCAMModel, queries: np.ndarray, *, euclidean: bool = False
) -> np.ndarray:
    """Labels only, as an int64 array; cheaper than building Predictions."""
    ids, dists = _score(model, queries, force_euclidean=euclidean)
    id_arr = np.asarray(ids, dtype=np.int64)
    return id_arr[np.argmin(dists, axis=1)]


def model_storage_report(model: FeCAMModel) -> StorageReport:
    """Bytes the model occupies at rest (f32, triangular covariance storage)."""
    d = model.dim or 0
    n = model.n_classes
    proto = n * d * 4
    mode = model.config.mode
    if n == 0:
        cov_bytes = 0
    elif mode is Mode.PER_CLASS:
        cov_bytes = n * cov_ops.triangular_byte_size(d)
    elif mode is Mode.COMMON:
        cov_bytes = cov_ops.triangular_byte_size(d)
    elif mode is Mode.DIAGONAL:
        cov_bytes = n * d * 4
    else:
        cov_bytes = 0
    return StorageReport(
        mode=mode,
        dim=d,
        n_classes=n,
        prototype_bytes=proto,
        covariance_bytes=cov_bytes,
    )


def from_parameters(
    means: np.ndarray,
    covariances: np.ndarray | list[np.ndarray] | None,
    config: FeCAMConfig | None = None,
    class_ids: list[int] | None = None,
    *,
    condition: bool = False,
) -> FeCAMModel:
    """Build a sealed model directly from known class parameters.

    This is the injection path used to study the classifier with exact
    Gaussian parameters (oracle comparisons, forced-identity reductions).
    With ``condition=False`` the given covariances are factorized as-is;
    with ``condition=True`` they are run through the configured shrinkage
    and normalization first.

    Args:
        means: (Y, D) class means; also used as prototypes.
        covariances: (Y, D, D) stack or list, or None for euclidean mode.
        config: Model configuration; mode must match the payload.
        class_ids: Defaults to 0..Y-1.

    Returns:
        A sealed model with count=0 classes (no fitted samples).
    """
    config = config or FeCAMConfig()
    mu = np.asarray(means, dtype=np.float64)
    if mu.ndim != 2:
        raise DataError(f"means must be (Y, D), got shape {mu.shape}")
    n_classes, d = mu.shape
    ids = list(range(n_classes)) if class_ids is None else [int(c) for c in class_ids]
    if len(ids) != n_classes or len(set(ids)) != n_classes:
        raise DataError("class_ids must be unique and match the number of means")

    needs_cov = config.mode is not Mode.EUCLIDEAN
    if needs_cov:
        if covariances is None:
            raise DataError(f"{config.mode.value} mode requires covariances")
        covs = [np.asarray(c, dtype=np.float64) for c in covariances]
        if len(covs) != n_classes or any(c.shape != (d, d) for c in covs):
            raise DataError("covariances must be Y matrices of shape (D, D)")
    else:
        covs = []

    def conditioned(raw: CovarianceMatrix) -> tuple[CovarianceMatrix, CovarianceMatrix, PrecisionMatrix]:
        if condition:
            return _seal_full(raw, config)
        shrunk = cov_ops.shrink(raw, 0.0, 0.0)  # stage advance only
        return shrunk, shrunk, cov_ops.invert_spd(shrunk)

    classes: dict[int, ClassModel] = {}
    for k, cid in enumerate(ids):
        proto_raw = mu[k].copy()
        proto_raw.flags.writeable = False
        scored = tukey(mu[k], config.tukey) if config.tukey.enabled else mu[k]
        scored = np.array(scored, dtype=np.float64)
        scored.flags.writeable = False
        if config.mode is Mode.PER_CLASS:
            raw = CovarianceMatrix.from_dense(covs[k], Stage.RAW, 0)
            shrunk, final, precision = conditioned(raw)
            classes[cid] = ClassModel(
                cid, 0, proto_raw, scored,
                covariance=final, precision=precision,
                cov_raw=raw, cov_shrunk=shrunk,
            )
        elif config.mode is Mode.DIAGONAL:
            raw = CovarianceMatrix.from_dense(covs[k], Stage.RAW, 0)
            shrunk = cov_ops.shrink(raw, config.gamma1 if condition else 0.0,
                                    config.gamma2 if condition else 0.0)
            diag = cov_ops.normalize_diagonal(shrunk)
            classes[cid] = ClassModel(
                cid, 0, proto_raw, scored,
                covariance=diag, cov_raw=raw, cov_shrunk=shrunk,
            )
        else:
            classes[cid] = ClassModel(cid, 0, proto_raw, scored)

    common_cov = None
    common_precision = None
    if config.mode is Mode.COMMON:
        mean_cov = np.mean(covs, axis=0)
        common_cov = CovarianceMatrix.from_dense(mean_cov, Stage.RAW, 0)
        gammas = (config.gamma1, config.gamma2) if condition else (0.0, 0.0)
        common_precision = cov_ops.invert_spd(
            cov_ops.shrink(common_cov, *gammas)
        )

    return FeCAMModel(
        config=config,
        dim=d,
        classes=classes,
        common_cov=common_cov,
        common_precision=common_precision,
        task_log=((0, tuple(sorted(ids))),),
        notes=("built from injected parameters",),
    )
