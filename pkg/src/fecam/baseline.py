"""Sampled-feature linear classifier baseline.

An alternative to distance scoring: treat each class's fitted Gaussian as
a generator, draw pseudo-features from it, and train a multinomial
logistic regression on the draws. Because its decision boundaries are
affine while the generating model's optimal boundaries are quadratic
whenever class covariances differ, this baseline is structurally capped
below the distance classifier on heterogeneous data. It exists to make
that gap measurable.

Training is deterministic full-batch gradient descent: same data, seed
and schedule give bit-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fecam.classifier import FeCAMModel, Mode
from fecam.errors import DataError, TrainingError

__all__ = [
    "LinearClassifier",
    "sample_from_gaussians",
    "train_linear",
    "predict_linear",
    "softmax_loss_and_grad",
]


@dataclass(frozen=True)
class LinearClassifier:
    """Affine scorer: label = argmax over classes of W x + b."""

    class_ids: tuple[int, ...]
    weights: np.ndarray  # (Y, D)
    biases: np.ndarray  # (Y,)
    trained_on: int  # samples per class used for training
    seed: int


def sample_from_gaussians(
    model: FeCAMModel, k: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw k pseudo-feature rows per class from the model's Gaussians.

    Uses the scoring prototypes and the shrunk (pre-normalization)
    covariances: normalization rescales matrices onto a common diagonal
    and destroys the true scale a generator needs.

    Returns:
        (k * Y, D) features and their labels, grouped by ascending
        class_id; identical for identical seeds.

    Raises:
        DataError: Unless the model is per-class mode with retained shrunk
            covariances (models loaded from disk drop them).
    """
    if model.config.mode is not Mode.PER_CLASS:
        raise DataError("sampling requires a per_class model")
    if k < 1:
        raise DataError(f"samples per class must be >= 1, got {k}")
    ids = model.class_ids
    if not ids:
        raise DataError("model has no classes")
    rng = np.random.default_rng(seed)
    dim = model.dim
    features = np.empty((k * len(ids), dim))
    labels = np.empty(k * len(ids), dtype=np.int64)
    for i, cid in enumerate(ids):
        cm = model.classes[cid]
        if cm.cov_shrunk is None:
            raise DataError(
                f"class {cid} has no retained shrunk covariance; "
                "sample from a freshly fitted model"
            )
        try:
            chol = np.linalg.cholesky(cm.cov_shrunk.entries)
        except np.linalg.LinAlgError as exc:
            raise DataError(
                f"class {cid}: shrunk covariance is not positive definite"
            ) from exc
        z = rng.standard_normal((k, dim))
        block = slice(i * k, (i + 1) * k)
        features[block] = cm.prototype_scored + z @ chol.T
        labels[block] = cid
    return features, labels


def softmax_loss_and_grad(
    weights: np.ndarray,
    biases: np.ndarray,
    x: np.ndarray,
    onehot: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and its gradients for an affine softmax model."""
    scores = x @ weights.T + biases
    scores -= scores.max(axis=1, keepdims=True)
    exp = np.exp(scores)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = x.shape[0]
    eps = np.finfo(np.float64).tiny
    loss = float(-np.mean(np.log(np.maximum((probs * onehot).sum(axis=1), eps))))
    delta = (probs - onehot) / n
    return loss, delta.T @ x, delta.sum(axis=0)


def train_linear(
    features: np.ndarray,
    labels: np.ndarray,
    epochs: int = 500,
    learning_rate: float = 0.1,
    seed: int = 0,
) -> LinearClassifier:
    """Fit a multinomial logistic regression by full-batch gradient descent.

    The loss is non-increasing across accepted steps: whenever a step
    would raise the loss by more than 1e-6, the step is rejected and the
    learning rate halved.

    Raises:
        DataError: Fewer than two classes.
        TrainingError: Non-finite loss (divergence).
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DataError("features must be (n, D) with matching labels")
    ids = tuple(int(c) for c in np.unique(y))
    if len(ids) < 2:
        raise DataError(f"need at least two classes, got {len(ids)}")
    index = {cid: i for i, cid in enumerate(ids)}
    onehot = np.zeros((x.shape[0], len(ids)))
    onehot[np.arange(x.shape[0]), [index[int(c)] for c in y]] = 1.0

    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 0.01, size=(len(ids), x.shape[1]))
    biases = np.zeros(len(ids))
    lr = float(learning_rate)

    loss, grad_w, grad_b = softmax_loss_and_grad(weights, biases, x, onehot)
    for _ in range(epochs):
        while True:
            new_w = weights - lr * grad_w
            new_b = biases - lr * grad_b
            new_loss, new_gw, new_gb = softmax_loss_and_grad(new_w, new_b, x, onehot)
            if not np.isfinite(new_loss):
                raise TrainingError("loss diverged to a non-finite value")
            if new_loss <= loss + 1e-6:
                break
            lr *= 0.5
            if lr < 1e-12:
                # Gradient can no longer improve the loss at any step size.
                new_w, new_b, new_loss = weights, biases, loss
                new_gw, new_gb = grad_w, grad_b
                break
        weights, biases, loss = new_w, new_b, new_loss
        grad_w, grad_b = new_gw, new_gb

    weights.flags.writeable = False
    biases.flags.writeable = False
    counts = np.bincount([index[int(c)] for c in y])
    return LinearClassifier(
        class_ids=ids,
        weights=weights,
        biases=biases,
        trained_on=int(counts.min()),
        seed=seed,
    )


def predict_linear(clf: LinearClassifier, queries: np.ndarray) -> np.ndarray:
    """Labels by argmax of affine scores; exact ties go to the smallest id."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != clf.weights.shape[1]:
        raise DataError(
            f"queries must be (m, {clf.weights.shape[1]}), got shape {q.shape}"
        )
    scores = q @ clf.weights.T + clf.biases
    ids = np.asarray(clf.class_ids, dtype=np.int64)
    return ids[np.argmax(scores, axis=1)]
