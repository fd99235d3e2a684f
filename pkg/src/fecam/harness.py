"""Protocol construction, run orchestration, metrics, and desk-scale oracles.

This module turns a labeled embedding set into an ordered task stream
(many-shot, few-shot, or domain-incremental), drives the classifier
through it, and reports per-task accuracy plus the average incremental
accuracy. It also houses the synthetic Gaussian generator and the exact
Bayes oracle that make the classifier's claims testable without any
trained backbone.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from fecam import classifier as clf
from fecam.classifier import FeCAMConfig, FeCAMModel, Mode
from fecam.covariance import triangular_byte_size
from fecam.errors import DataError, ProtocolError

__all__ = [
    "ProtocolKind",
    "ProtocolConfig",
    "TaskSplit",
    "TaskStream",
    "EvalReport",
    "build_splits",
    "run_protocol",
    "singular_value_profile",
    "CovSpec",
    "SynthSpec",
    "TrueParams",
    "synth_generate",
    "bayes_oracle",
]


class ProtocolKind(enum.Enum):
    MSCIL = "mscil"
    FSCIL = "fscil"
    DIL = "dil"


@dataclass(frozen=True)
class ProtocolConfig:
    """Shape of an incremental-learning run.

    For class-incremental kinds, the first task holds ``initial_classes``
    classes and each of the ``tasks`` following tasks adds
    ``classes_per_task`` new ones. Few-shot runs additionally subsample
    ``shots`` training rows per new class. Domain-incremental runs train
    one task per entry of ``domain_order`` instead.
    """

    kind: ProtocolKind = ProtocolKind.MSCIL
    initial_classes: int = 0
    tasks: int = 0
    classes_per_task: int = 0
    shots: int = 0
    domain_order: tuple[int, ...] = ()
    seed: int = 0


@dataclass(frozen=True)
class TaskSplit:
    task_index: int
    train_rows: np.ndarray
    class_ids: tuple[int, ...]
    domain_id: int | None = None


@dataclass(frozen=True)
class TaskStream:
    kind: ProtocolKind
    tasks: tuple[TaskSplit, ...]
    seed: int


@dataclass(frozen=True)
class EvalReport:
    """Outcome of one protocol run.

    ``avg_incremental_accuracy`` is the arithmetic mean of
    ``per_task_accuracy``; ``last_accuracy`` its final entry.
    """

    kind: ProtocolKind
    per_task_accuracy: tuple[float, ...]
    avg_incremental_accuracy: float
    last_accuracy: float
    per_class_accuracy: dict[int, float]
    storage: clf.StorageReport
    wall_clock_per_task: tuple[float, ...]
    config_echo: dict[str, str]
    notes: tuple[str, ...] = ()

    def to_text(self) -> str:
        lines = [f"kind={self.kind.value}"]
        for i, (acc, wall) in enumerate(
            zip(self.per_task_accuracy, self.wall_clock_per_task)
        ):
            lines.append(f"task{i}.accuracy={acc:.6f}")
            lines.append(f"task{i}.wall_clock_s={wall:.4f}")
        lines.append(f"avg_incremental_accuracy={self.avg_incremental_accuracy:.6f}")
        lines.append(f"last_accuracy={self.last_accuracy:.6f}")
        lines.append(f"storage.total_bytes={self.storage.total_bytes}")
        lines.append(f"storage.prototype_bytes={self.storage.prototype_bytes}")
        lines.append(f"storage.covariance_bytes={self.storage.covariance_bytes}")
        for cid in sorted(self.per_class_accuracy):
            lines.append(f"class{cid}.accuracy={self.per_class_accuracy[cid]:.6f}")
        for key in sorted(self.config_echo):
            lines.append(f"config.{key}={self.config_echo[key]}")
        for note in self.notes:
            lines.append(f"note={note}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["task,accuracy,wall_clock_s"]
        for i, (acc, wall) in enumerate(
            zip(self.per_task_accuracy, self.wall_clock_per_task)
        ):
            rows.append(f"{i},{acc:.6f},{wall:.4f}")
        return "\n".join(rows)


def build_splits(
    labels: np.ndarray,
    config: ProtocolConfig,
    domains: np.ndarray | None = None,
) -> TaskStream:
    """Partition training rows into an ordered task stream.

    Classes are taken in ascending label order: the first
    ``initial_classes`` of them form the base task, the rest fill the
    incremental tasks. ``tasks == 0`` yields a single joint task over all
    classes. Few-shot streams keep only ``shots`` rows per new class,
    chosen with the config seed. Domain-incremental streams emit one task
    per domain in ``domain_order``.

    Raises:
        ProtocolError: If the label set cannot satisfy the config.
    """
    y = np.asarray(labels)
    if y.ndim != 1 or y.size == 0:
        raise ProtocolError("labels must be a nonempty 1-D array")

    if config.kind is ProtocolKind.DIL:
        return _build_dil(y, config, domains)

    class_order = [int(c) for c in np.unique(y)]
    n_avail = len(class_order)

    if config.tasks == 0:
        groups = [class_order]
    else:
        if config.initial_classes <= 0 or config.classes_per_task <= 0:
            raise ProtocolError(
                "initial_classes and classes_per_task must be positive"
            )
        needed = config.initial_classes + config.tasks * config.classes_per_task
        if needed > n_avail:
            raise ProtocolError(
                f"config needs {needed} classes but labels contain {n_avail}"
            )
        groups = [class_order[: config.initial_classes]]
        cursor = config.initial_classes
        for _ in range(config.tasks):
            groups.append(class_order[cursor : cursor + config.classes_per_task])
            cursor += config.classes_per_task

    rng = np.random.default_rng(config.seed)
    few_shot = config.kind is ProtocolKind.FSCIL
    if few_shot and config.shots < 1:
        raise ProtocolError("few-shot protocol requires shots >= 1")

    tasks = []
    for t, group in enumerate(groups):
        rows = []
        for cid in group:
            class_rows = np.flatnonzero(y == cid)
            if few_shot and t > 0:
                if class_rows.size < config.shots:
                    raise ProtocolError(
                        f"class {cid} has {class_rows.size} rows, "
                        f"fewer than shots={config.shots}"
                    )
                class_rows = np.sort(
                    rng.choice(class_rows, size=config.shots, replace=False)
                )
            rows.append(class_rows)
        train_rows = np.concatenate(rows)
        train_rows.flags.writeable = False
        tasks.append(TaskSplit(t, train_rows, tuple(group)))
    return TaskStream(config.kind, tuple(tasks), config.seed)


def _build_dil(
    y: np.ndarray, config: ProtocolConfig, domains: np.ndarray | None
) -> TaskStream:
    if domains is None:
        raise ProtocolError("domain-incremental splits require a domains array")
    d = np.asarray(domains)
    if d.shape != y.shape:
        raise ProtocolError("domains must align with labels")
    if not config.domain_order:
        raise ProtocolError("domain_order must list at least one training domain")
    tasks = []
    for t, dom in enumerate(config.domain_order):
        rows = np.flatnonzero(d == dom)
        if rows.size == 0:
            raise ProtocolError(f"domain {dom} has no rows")
        rows.flags.writeable = False
        class_ids = tuple(int(c) for c in np.unique(y[rows]))
        tasks.append(TaskSplit(t, rows, class_ids, domain_id=int(dom)))
    return TaskStream(config.kind, tuple(tasks), config.seed)


def run_protocol(
    stream: TaskStream,
    train_features: np.ndarray,
    train_labels: np.ndarray,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    model_config: FeCAMConfig,
    *,
    config_echo: dict[str, str] | None = None,
    eval_per_task_only: bool = False,
) -> tuple[EvalReport, FeCAMModel]:
    """Fit every task in order and evaluate after each one.

    Class-incremental kinds evaluate on the cumulative test set of all
    classes seen so far (no task labels at test time); with
    ``eval_per_task_only`` the evaluation narrows to the current task's
    classes, as a diagnostic. Domain-incremental runs evaluate once, on the
    full held-out test set after the last training domain.

    Returns:
        The report and the final sealed model.

    Raises:
        ProtocolError: Any fit or predict failure, tagged with the task
            index.
    """
    x_train = np.asarray(train_features, dtype=np.float64)
    y_train = np.asarray(train_labels)
    x_test = np.asarray(test_features, dtype=np.float64)
    y_test = np.asarray(test_labels)

    model = FeCAMModel.initial(model_config)
    accuracies: list[float] = []
    walls: list[float] = []
    seen: set[int] = set()
    final_pred: np.ndarray | None = None
    final_truth: np.ndarray | None = None

    for task in stream.tasks:
        start = time.perf_counter()
        try:
            model = clf.fit_task(
                model, x_train[task.train_rows], y_train[task.train_rows]
            )
            seen.update(task.class_ids)
            is_last = task.task_index == len(stream.tasks) - 1
            if stream.kind is ProtocolKind.DIL and not is_last:
                walls.append(time.perf_counter() - start)
                continue
            if stream.kind is ProtocolKind.DIL:
                mask = np.ones(y_test.size, dtype=bool)
            elif eval_per_task_only:
                mask = np.isin(y_test, np.asarray(task.class_ids))
            else:
                mask = np.isin(y_test, np.asarray(sorted(seen)))
            if not mask.any():
                raise ProtocolError("no test rows cover the classes seen so far")
            pred = clf.predict_labels(model, x_test[mask])
            truth = y_test[mask]
            accuracies.append(float(np.mean(pred == truth)))
            final_pred, final_truth = pred, truth
        except ProtocolError:
            raise
        except Exception as exc:
            raise ProtocolError(f"task {task.task_index}: {exc}") from exc
        walls.append(time.perf_counter() - start)

    per_class = {}
    for cid in sorted(set(int(c) for c in final_truth)):
        sel = final_truth == cid
        per_class[cid] = float(np.mean(final_pred[sel] == cid))

    report = EvalReport(
        kind=stream.kind,
        per_task_accuracy=tuple(accuracies),
        avg_incremental_accuracy=float(np.mean(accuracies)),
        last_accuracy=accuracies[-1],
        per_class_accuracy=per_class,
        storage=clf.model_storage_report(model),
        wall_clock_per_task=tuple(walls),
        config_echo=dict(config_echo or {}),
        notes=model.notes,
    )
    return report, model


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassSpectrum:
    class_id: int
    singular_values: np.ndarray  # descending
    anisotropy_ratio: float  # max / min singular value


def singular_value_profile(
    features: np.ndarray, labels: np.ndarray
) -> list[ClassSpectrum]:
    """Singular values of each class's centered feature matrix.

    The anisotropy ratio (largest over smallest singular value) is a
    direct, model-free read on how far a class is from an isotropic blob.

    Raises:
        DataError: If any class has fewer than 2 samples.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    out = []
    for cid in np.unique(y):
        rows = x[y == cid]
        if rows.shape[0] < 2:
            raise DataError(
                f"class {int(cid)} has {rows.shape[0]} samples; need >= 2"
            )
        centered = rows - rows.mean(axis=0)
        svals = np.linalg.svd(centered, compute_uv=False)
        smin = float(svals[-1])
        ratio = float(svals[0] / smin) if smin > 0 else float("inf")
        svals.flags.writeable = False
        out.append(ClassSpectrum(int(cid), svals, ratio))
    return out


# ---------------------------------------------------------------------------
# Synthetic data and oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovSpec:
    """Covariance recipe for one synthetic class.

    kinds:
        isotropic: scale^2 * I.
        anisotropic: variances geometrically spaced from (scale *
            anisotropy)^2 down to scale^2, in a random orientation, so the
            singular-value ratio of sampled data approaches ``anisotropy``.
        random_spd: random orthogonal basis with eigenvalues drawn uniform
            in [0.5, 2.0], times scale^2.
    """

    kind: str = "isotropic"
    scale: float = 1.0
    anisotropy: float = 1.0

    def materialize(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "isotropic":
            return self.scale**2 * np.eye(dim)
        if self.kind == "anisotropic":
            variances = np.geomspace(
                (self.scale * self.anisotropy) ** 2, self.scale**2, dim
            )
            basis = _random_orthogonal(dim, rng)
            return basis @ np.diag(variances) @ basis.T
        if self.kind == "random_spd":
            eigs = rng.uniform(0.5, 2.0, size=dim) * self.scale**2
            basis = _random_orthogonal(dim, rng)
            return basis @ np.diag(eigs) @ basis.T
        raise DataError(f"unknown covariance kind {self.kind!r}")


def _random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic labeled embedding set."""

    classes: int = 20
    dim: int = 16
    rows_per_class: int = 500
    mean_spread: float = 8.0
    cov: CovSpec | tuple[CovSpec, ...] = field(default_factory=CovSpec)
    seed: int = 0

    def cov_for(self, class_index: int) -> CovSpec:
        if isinstance(self.cov, CovSpec):
            return self.cov
        if len(self.cov) != self.classes:
            raise DataError(
                f"per-class covariance list has {len(self.cov)} entries "
                f"for {self.classes} classes"
            )
        return self.cov[class_index]


@dataclass(frozen=True)
class TrueParams:
    class_ids: tuple[int, ...]
    means: np.ndarray  # (Y, D)
    covariances: np.ndarray  # (Y, D, D)


def synth_generate(
    spec: SynthSpec,
) -> tuple[np.ndarray, np.ndarray, TrueParams]:
    """Draw a reproducible Gaussian-mixture embedding set.

    Class means are drawn from N(0, mean_spread^2 I); each class's rows
    are drawn from its materialized covariance. The exact parameters are
    returned so oracles can be run against the same ground truth.
    """
    if spec.classes < 1 or spec.dim < 1 or spec.rows_per_class < 1:
        raise DataError("classes, dim and rows_per_class must be positive")
    rng = np.random.default_rng(spec.seed)
    means = rng.normal(0.0, spec.mean_spread, size=(spec.classes, spec.dim))
    covs = np.stack(
        [spec.cov_for(k).materialize(spec.dim, rng) for k in range(spec.classes)]
    )
    features = np.empty((spec.classes * spec.rows_per_class, spec.dim))
    labels = np.repeat(np.arange(spec.classes), spec.rows_per_class)
    for k in range(spec.classes):
        chol = np.linalg.cholesky(covs[k])
        z = rng.standard_normal((spec.rows_per_class, spec.dim))
        block = slice(k * spec.rows_per_class, (k + 1) * spec.rows_per_class)
        features[block] = means[k] + z @ chol.T
    return (
        features,
        labels,
        TrueParams(tuple(range(spec.classes)), means, covs),
    )


def sample_from_params(
    true_params: TrueParams, rows_per_class: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw fresh rows from existing ground-truth parameters.

    Use this to build a test set that shares its distribution with a
    training set produced by ``synth_generate``.
    """
    if rows_per_class < 1:
        raise DataError("rows_per_class must be positive")
    rng = np.random.default_rng(seed)
    n_classes, dim = true_params.means.shape
    features = np.empty((n_classes * rows_per_class, dim))
    labels = np.empty(n_classes * rows_per_class, dtype=np.int64)
    for k in range(n_classes):
        chol = np.linalg.cholesky(true_params.covariances[k])
        z = rng.standard_normal((rows_per_class, dim))
        block = slice(k * rows_per_class, (k + 1) * rows_per_class)
        features[block] = true_params.means[k] + z @ chol.T
        labels[block] = true_params.class_ids[k]
    return features, labels


def bayes_oracle(true_params: TrueParams, queries: np.ndarray) -> np.ndarray:
    """Exact Gaussian maximum-posterior labels under equal class priors.

    Scores every query against every class's full log-density, including
    the half-log-determinant term, by plain enumeration. This is the
    performance ceiling any distance-based classifier is measured against.

    Raises:
        DataError: If any true covariance is singular.
    """
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != true_params.means.shape[1]:
        raise DataError("queries must be (m, D) matching the true parameters")
    n_classes = len(true_params.class_ids)
    scores = np.empty((q.shape[0], n_classes))
    for k in range(n_classes):
        cov = true_params.covariances[k]
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DataError(
                f"true covariance for class {true_params.class_ids[k]} "
                "is singular"
            ) from exc
        diff = q - true_params.means[k]
        z = scipy.linalg.solve_triangular(
            chol, diff.T, lower=True, check_finite=False
        )
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        scores[:, k] = -0.5 * (np.einsum("ij,ij->j", z, z) + log_det)
    ids = np.asarray(true_params.class_ids, dtype=np.int64)
    return ids[np.argmax(scores, axis=1)]


def heterogeneous_suite_spec(
    seed: int,
    *,
    classes: int = 20,
    dim: int = 16,
    rows_per_class: int = 500,
    base_classes: int = 10,
    anisotropy: float = 10.0,
    mean_spread: float = 4.0,
) -> SynthSpec:
    """Spec for the mixed-geometry stream: isotropic base classes, then
    inflated anisotropic ones, which is where metric choice matters."""
    covs = tuple(
        CovSpec("isotropic", 1.0)
        if k < base_classes
        else CovSpec("anisotropic", 1.0, anisotropy)
        for k in range(classes)
    )
    return SynthSpec(
        classes=classes,
        dim=dim,
        rows_per_class=rows_per_class,
        mean_spread=mean_spread,
        cov=covs,
        seed=seed,
    )
