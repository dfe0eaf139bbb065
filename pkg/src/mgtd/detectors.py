"""Linear detectors trained by mini-batch Adam.

Three loss heads share one model shape: binary logistic (one weight row),
softmax multiclass, and one-vs-rest hinge (the linear-SVM configuration).
The implicit-adversarial classifier appends six standardized comparison
features to the TF-IDF block; standardization statistics are fitted on the
training rows only and frozen into the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .features import (
    TfIdfModel,
    implicit_feature_vector,
    tfidf_transform_many,
)
from .optim import Adam

LOSS_KINDS = ("LogisticBinary", "SoftmaxMulticlass", "Hinge")


class DetectorError(ValueError):
    """Raised for unusable training inputs."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    l2: float = 0.0
    seed: int = 0
    early_stop_patience: int = 2

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DetectorError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise DetectorError("epochs and batch_size must be at least 1")
        if self.l2 < 0 or self.early_stop_patience < 0:
            raise DetectorError("l2 and early_stop_patience must be non-negative")


@dataclass
class LinearModel:
    weights: np.ndarray  # rows: 1 for binary logistic, C otherwise
    bias: np.ndarray
    classes: tuple
    loss_kind: str
    tail_stats: tuple[np.ndarray, np.ndarray] | None = None  # (means, stds) of the tail block
    history: dict = field(default_factory=dict, compare=False)

    def to_record(self) -> dict:
        rec = {
            "classes": list(self.classes),
            "loss_kind": self.loss_kind,
            "bias": [float(x) for x in self.bias],
            "weights": [[float(x) for x in row] for row in self.weights],
        }
        if self.tail_stats is not None:
            means, stds = self.tail_stats
            rec["tail_stats"] = {
                "means": [float(x) for x in means],
                "stds": [float(x) for x in stds],
            }
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "LinearModel":
        tail = None
        if "tail_stats" in rec:
            tail = (
                np.asarray(rec["tail_stats"]["means"]),
                np.asarray(rec["tail_stats"]["stds"]),
            )
        return cls(
            weights=np.asarray(rec["weights"], dtype=np.float64),
            bias=np.asarray(rec["bias"], dtype=np.float64),
            classes=tuple(rec["classes"]),
            loss_kind=rec["loss_kind"],
            tail_stats=tail,
        )


def standardize_tail(features, stats) -> np.ndarray:
    """Apply frozen (mean, std) stats; constant columns map to zero."""
    means, stds = stats
    x = np.asarray(features, dtype=np.float64)
    out = np.zeros_like(x)
    np.divide(x - means, stds, out=out, where=stds > 0)
    return out


def _as_matrix(features):
    if sp.issparse(features):
        return sp.csr_matrix(features)
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr


def _scores(model: LinearModel, X):
    if model.tail_stats is not None:
        k = len(model.tail_stats[0])
        head, tail = X[:, :-k], X[:, -k:]
        if sp.issparse(tail):
            tail = tail.toarray()
        tail = standardize_tail(tail, model.tail_stats)
        z = head @ model.weights[:, :-k].T + tail @ model.weights[:, -k:].T
    else:
        z = X @ model.weights.T
    return np.asarray(z) + model.bias


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_gradient(weights, bias, X, y_idx, loss_kind: str, l2: float = 0.0):
    """Mean loss and analytic gradients for one batch.

    ``y_idx`` holds class indices. The l2 penalty (l2/2)·|W|^2 applies to the
    weight matrix only, never the bias.
    """
    n = X.shape[0]
    z = np.asarray(X @ weights.T) + bias
    if loss_kind == "LogisticBinary":
        zz = z[:, 0]
        y = (y_idx == 1).astype(np.float64)
        # stable softplus(z) - y*z
        loss = float(np.mean(np.maximum(zz, 0) - y * zz + np.log1p(np.exp(-np.abs(zz)))))
        delta = (_sigmoid(zz) - y)[:, None] / n
    elif loss_kind == "SoftmaxMulticlass":
        p = _softmax(z)
        loss = float(-np.mean(np.log(np.clip(p[np.arange(n), y_idx], 1e-300, None))))
        delta = p
        delta[np.arange(n), y_idx] -= 1.0
        delta /= n
    elif loss_kind == "Hinge":
        c = weights.shape[0]
        ys = np.full((n, c), -1.0)
        ys[np.arange(n), y_idx] = 1.0
        margins = 1.0 - ys * z
        active = margins > 0
        loss = float(np.where(active, margins, 0.0).sum() / n)
        delta = np.where(active, -ys, 0.0) / n
    else:
        raise DetectorError(f"unknown loss kind {loss_kind!r}")
    grad_w = np.asarray((X.T @ delta).T) + l2 * weights
    grad_b = delta.sum(axis=0)
    loss += 0.5 * l2 * float(np.sum(weights * weights))
    return loss, grad_w, grad_b


def _evaluate_loss(weights, bias, X, y_idx, loss_kind, l2):
    loss, _, _ = loss_and_gradient(weights, bias, X, y_idx, loss_kind, l2)
    return loss


def train(
    features,
    labels,
    config: TrainConfig,
    loss_kind: str = "LogisticBinary",
    val_features=None,
    val_labels=None,
) -> LinearModel:
    """Fit a linear model with mini-batch Adam.

    Deterministic for a fixed seed. When validation data is given, training
    early-stops after ``early_stop_patience`` epochs without improvement and
    the best-epoch parameters are restored.
    """
    X = _as_matrix(features)
    labels = list(labels)
    if X.shape[0] != len(labels):
        raise DetectorError("features and labels disagree on sample count")
    if X.shape[0] < 2:
        raise DetectorError("need at least 2 samples")
    if sp.issparse(X):
        if not np.all(np.isfinite(X.data)):
            raise DetectorError("features must be finite")
    elif not np.all(np.isfinite(X)):
        raise DetectorError("features must be finite")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise DetectorError("need at least 2 distinct labels")
    if loss_kind not in LOSS_KINDS:
        raise DetectorError(f"unknown loss kind {loss_kind!r}")
    if loss_kind == "LogisticBinary" and len(classes) != 2:
        raise DetectorError("LogisticBinary requires exactly 2 classes")
    index = {c: i for i, c in enumerate(classes)}
    y = np.asarray([index[l] for l in labels])
    rows = 1 if loss_kind == "LogisticBinary" else len(classes)
    weights = np.zeros((rows, X.shape[1]))
    bias = np.zeros(rows)

    val = None
    if val_features is not None:
        if val_labels is None:
            raise DetectorError("val_features given without val_labels")
        Xv = _as_matrix(val_features)
        yv = np.asarray([index[l] for l in val_labels])
        val = (Xv, yv)

    opt = Adam([weights.shape, bias.shape], config.learning_rate)
    rng = np.random.default_rng(config.seed)
    n = X.shape[0]
    history = {"train_loss": [], "val_loss": []}
    best = None
    best_val = np.inf
    stale = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, gw, gb = loss_and_gradient(weights, bias, X[idx], y[idx], loss_kind, config.l2)
            opt.step([weights, bias], [gw, gb])
        history["train_loss"].append(_evaluate_loss(weights, bias, X, y, loss_kind, config.l2))
        if val is not None:
            vloss = _evaluate_loss(weights, bias, val[0], val[1], loss_kind, config.l2)
            history["val_loss"].append(vloss)
            if vloss < best_val - 1e-12:
                best_val = vloss
                best = (weights.copy(), bias.copy())
                stale = 0
            else:
                stale += 1
                if stale > config.early_stop_patience:
                    break
    if best is not None:
        weights, bias = best
    return LinearModel(
        weights=weights, bias=bias, classes=classes, loss_kind=loss_kind, history=history
    )


def predict_proba(model: LinearModel, features) -> np.ndarray:
    """Probability vector over ``model.classes`` (rows for matrix input)."""
    X = _as_matrix(features)
    if X.shape[1] != model.weights.shape[1]:
        raise DetectorError(
            f"feature dimension {X.shape[1]} does not match model {model.weights.shape[1]}"
        )
    z = _scores(model, X)
    if model.loss_kind == "LogisticBinary":
        p1 = _sigmoid(z[:, 0])
        probs = np.stack([1.0 - p1, p1], axis=1)
    else:
        # hinge margins go through the same softmax to give normalized scores
        probs = _softmax(z)
    if not sp.issparse(features) and np.asarray(features).ndim == 1:
        return probs[0]
    return probs


def predict(model: LinearModel, features):
    """Argmax label; ties resolve to the lowest class index."""
    probs = predict_proba(model, features)
    if probs.ndim == 1:
        return model.classes[int(np.argmax(probs))]
    return [model.classes[i] for i in np.argmax(probs, axis=1)]


def implicit_design_matrix(raw_texts, normalized_texts, tfidf: TfIdfModel, folding) -> sp.csr_matrix:
    """[TF-IDF(raw) | six comparison features], unstandardized."""
    raw_texts = list(raw_texts)
    normalized_texts = list(normalized_texts)
    if len(raw_texts) != len(normalized_texts):
        raise DetectorError("raw and normalized text lists disagree on length")
    head = tfidf_transform_many(tfidf, raw_texts)
    tail = np.vstack(
        [
            implicit_feature_vector(r, p, tfidf, folding).as_array()
            for r, p in zip(raw_texts, normalized_texts)
        ]
    )
    return sp.hstack([head, sp.csr_matrix(tail)], format="csr")


def fit_tail_stats(X, k: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Mean/std of the last ``k`` columns, for train-time freezing."""
    tail = X[:, -k:]
    if sp.issparse(tail):
        tail = tail.toarray()
    return tail.mean(axis=0), tail.std(axis=0)


def build_implicit_classifier(
    raw_texts,
    normalized_texts,
    labels,
    tfidf: TfIdfModel,
    config: TrainConfig,
    folding,
    val_raw=None,
    val_normalized=None,
    val_labels=None,
) -> LinearModel:
    """Train the implicit adversarial classifier.

    The model never sees an attacked/clean indicator; it is a plain logistic
    head over TF-IDF of the raw text plus the standardized comparison
    features, trained on Human/AI labels.
    """
    X = implicit_design_matrix(raw_texts, normalized_texts, tfidf, folding)
    stats = fit_tail_stats(X)
    Xs = sp.hstack(
        [X[:, :-6], sp.csr_matrix(standardize_tail(X[:, -6:].toarray(), stats))], format="csr"
    )
    val_X = None
    if val_raw is not None:
        vX = implicit_design_matrix(val_raw, val_normalized, tfidf, folding)
        val_X = sp.hstack(
            [vX[:, :-6], sp.csr_matrix(standardize_tail(vX[:, -6:].toarray(), stats))],
            format="csr",
        )
    model = train(Xs, labels, config, "LogisticBinary", val_X, val_labels)
    model.tail_stats = stats
    return model
