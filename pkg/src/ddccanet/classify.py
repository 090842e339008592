"""Downstream classifiers and evaluation reports.

Two deliberately simple classifiers: nearest neighbour (zero hyperparameters,
sanity baseline) and one-vs-all ridge regression (closed form, no external
solver). All tie-breaking picks the lowest class id, so predictions are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .solver import sym_eig

CLASSIFIER_KINDS = ("nearest_neighbor", "ridge_one_vs_all")
NN_METRICS = ("euclidean", "cosine")

_PREDICT_CHUNK = 256


@dataclass
class ClassifierModel:
    kind: str
    class_count: int
    metric: str = "euclidean"
    lam: float = 0.0
    train_features: np.ndarray | None = None
    train_labels: np.ndarray | None = None
    weights: np.ndarray | None = None  # (classes, dim + 1), last column is the bias

    @property
    def feature_dim(self) -> int:
        if self.kind == "nearest_neighbor":
            return self.train_features.shape[1]
        return self.weights.shape[1] - 1


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray  # rows: true class, cols: predicted
    stage_seconds: dict[str, float] = field(default_factory=dict)
    threads: int = 1
    deterministic: bool = True

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def _check_training_set(features: np.ndarray, labels: np.ndarray) -> int:
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ShapeError(
            f"features {features.shape} do not pair with {labels.shape[0]} labels"
        )
    if labels.size == 0 or labels.min() < 0:
        raise ConfigError("labels must be non-negative and non-empty")
    class_count = int(labels.max()) + 1
    present = np.bincount(labels, minlength=class_count)
    if np.any(present == 0):
        raise ConfigError("every class id in [0, max] needs at least one training sample")
    return class_count


def fit(features, labels, kind: str = "nearest_neighbor", metric: str = "euclidean", lam: float | None = None) -> ClassifierModel:
    """Train a classifier on row-wise feature vectors."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    class_count = _check_training_set(features, labels)
    if kind not in CLASSIFIER_KINDS:
        raise ConfigError(f"classifier kind {kind!r} not one of {CLASSIFIER_KINDS}")

    if kind == "nearest_neighbor":
        if metric not in NN_METRICS:
            raise ConfigError(f"metric {metric!r} not one of {NN_METRICS}")
        return ClassifierModel(
            kind=kind,
            class_count=class_count,
            metric=metric,
            train_features=features.copy(),
            train_labels=labels.copy(),
        )

    n, d = features.shape
    x = np.hstack([features, np.ones((n, 1))])
    if lam is None:
        lam = 1e-3 * float(np.sum(x * x)) / x.shape[1]
    if lam <= 0:
        raise ConfigError(f"ridge lambda {lam} must be > 0")
    y = np.where(labels[:, None] == np.arange(class_count)[None, :], 1.0, -1.0)
    if n <= d + 1:
        # Dual form: w = X'(XX' + lam I)^-1 Y, identical to the primal solution
        # but the eigendecomposition stays at the sample count.
        g = x @ x.T + lam * np.eye(n)
        w_eig, v = sym_eig(0.5 * (g + g.T))
        solved = (v * (1.0 / w_eig)) @ (v.T @ y)
        weights = (x.T @ solved).T
    else:
        g = x.T @ x + lam * np.eye(d + 1)
        w_eig, v = sym_eig(0.5 * (g + g.T))
        weights = ((v * (1.0 / w_eig)) @ (v.T @ (x.T @ y))).T
    return ClassifierModel(kind=kind, class_count=class_count, lam=lam, weights=weights)


def _nn_distances(model: ClassifierModel, queries: np.ndarray) -> np.ndarray:
    train = model.train_features
    if model.metric == "euclidean":
        # Squared distances preserve the argmin and avoid a sqrt.
        q2 = np.sum(queries * queries, axis=1)[:, None]
        t2 = np.sum(train * train, axis=1)[None, :]
        return q2 + t2 - 2.0 * (queries @ train.T)
    qn = np.linalg.norm(queries, axis=1)[:, None]
    tn = np.linalg.norm(train, axis=1)[None, :]
    denom = qn * tn
    sim = np.divide(queries @ train.T, denom, out=np.zeros((queries.shape[0], train.shape[0])), where=denom > 0)
    return 1.0 - sim


def predict_many(model: ClassifierModel, features) -> np.ndarray:
    """Predicted class ids for row-wise feature vectors."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.feature_dim:
        raise ShapeError(
            f"feature dim {features.shape[-1] if features.ndim else '?'} does not match "
            f"model dim {model.feature_dim}"
        )
    preds = np.empty(features.shape[0], dtype=np.int64)
    for start in range(0, features.shape[0], _PREDICT_CHUNK):
        chunk = features[start : start + _PREDICT_CHUNK]
        if model.kind == "nearest_neighbor":
            dists = _nn_distances(model, chunk)
            for i, row in enumerate(dists):
                winners = model.train_labels[row == row.min()]
                preds[start + i] = winners.min()
        else:
            scores = np.hstack([chunk, np.ones((chunk.shape[0], 1))]) @ model.weights.T
            # argmax returns the first maximum: lowest class id on ties.
            preds[start : start + chunk.shape[0]] = np.argmax(scores, axis=1)
    return preds


def predict(model: ClassifierModel, feature) -> int:
    return int(predict_many(model, np.asarray(feature, dtype=np.float64)[None, :])[0])


def evaluate(
    model: ClassifierModel,
    features,
    labels,
    stage_seconds: dict[str, float] | None = None,
    threads: int = 1,
    deterministic: bool = True,
) -> EvalReport:
    """Confusion counts, overall and per-class accuracy on a test set."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ConfigError("cannot evaluate on an empty test set")
    preds = predict_many(model, features)
    c = model.class_count
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    row_totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = np.where(row_totals > 0, np.diag(confusion) / np.maximum(row_totals, 1), np.nan)
    return EvalReport(
        accuracy=float(np.trace(confusion) / labels.size),
        per_class_accuracy=per_class,
        confusion=confusion,
        stage_seconds=dict(stage_seconds or {}),
        threads=threads,
        deterministic=deterministic,
    )
