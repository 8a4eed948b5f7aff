"""Desk-scale end-to-end evaluation: logistic regression and metrics.

The classifier is multinomial logistic regression fit by full-batch gradient
descent with step halving on any loss increase, so the training loss is
non-increasing by construction.  Features are z-scored with statistics from
the training subset only (constant features get unit scale).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateModelError, InvalidInputError
from .ratedist import FeatureMatrix


@dataclass(frozen=True)
class TrainConfig:
    step: float = 0.1
    l2: float = 1e-4
    max_iter: int = 2000
    tol: float = 1e-7
    standardize: bool = True
    init_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.step <= 0 or self.max_iter < 1 or self.tol <= 0 or self.l2 < 0:
            raise InvalidInputError("bad training configuration")


@dataclass(frozen=True)
class LinearModel:
    """Multinomial logistic model plus the z-score transform it was fit on."""

    weights: np.ndarray        # c x d
    bias: np.ndarray           # c
    feature_mean: np.ndarray   # d
    feature_scale: np.ndarray  # d
    n_classes: int
    iterations: int
    final_loss: float
    l2: float
    seed: int


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    macro_f1: float
    auroc_macro_ovr: float
    per_class: Dict[int, Dict[str, float]]
    degenerate_classes: Tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "auroc_macro_ovr": self.auroc_macro_ovr,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
            "degenerate_classes": list(self.degenerate_classes),
        }


def _one_hot(labels: np.ndarray, c: int) -> np.ndarray:
    out = np.zeros((c, labels.size))
    out[labels, np.arange(labels.size)] = 1.0
    return out


def _softmax_columns(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    X: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy with L2 on the weights (bias unregularized)."""
    n = X.shape[1]
    scores = weights @ X + bias[:, None]
    shifted = scores - scores.max(axis=0, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=0))
    log_probs = shifted - log_z[None, :]
    loss = -float(np.mean(log_probs[labels, np.arange(n)]))
    loss += 0.5 * l2 * float(np.sum(weights * weights))
    probs = np.exp(log_probs)
    delta = probs - _one_hot(labels, weights.shape[0])
    grad_w = (delta @ X.T) / n + l2 * weights
    grad_b = delta.sum(axis=1) / n
    return loss, grad_w, grad_b


def train_logreg(train: FeatureMatrix, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Fit by gradient descent until the gradient norm drops below ``tol``.

    Deterministic for a fixed seed; raises on single-class training data.
    """
    if train.labels is None:
        raise InvalidInputError("training requires labels")
    classes = np.unique(train.labels)
    if classes.size < 2:
        raise DegenerateModelError(
            f"training set has {classes.size} class(es); need at least 2"
        )
    c = train.n_classes
    d, n = train.d, train.n

    if config.standardize:
        mean = train.data.mean(axis=1)
        scale = train.data.std(axis=1)
        scale = np.where(scale == 0.0, 1.0, scale)
    else:
        mean = np.zeros(d)
        scale = np.ones(d)
    X = (train.data - mean[:, None]) / scale[:, None]
    y = train.labels

    rng = np.random.default_rng(config.seed)
    if config.init_scale > 0:
        W = config.init_scale * rng.standard_normal((c, d))
        b = config.init_scale * rng.standard_normal(c)
    else:
        W = np.zeros((c, d))
        b = np.zeros(c)

    step = config.step
    loss, gw, gb = loss_and_grad(W, b, X, y, config.l2)
    iters = 0
    for iters in range(1, config.max_iter + 1):
        gnorm = math.sqrt(float(np.sum(gw * gw) + np.sum(gb * gb)))
        if gnorm < config.tol:
            iters -= 1
            break
        accepted = False
        while step > 1e-12:
            W2 = W - step * gw
            b2 = b - step * gb
            new_loss, gw2, gb2 = loss_and_grad(W2, b2, X, y, config.l2)
            if new_loss <= loss:
                W, b, loss, gw, gb = W2, b2, new_loss, gw2, gb2
                accepted = True
                break
            step /= 2.0
        if not accepted:
            break

    return LinearModel(
        weights=W,
        bias=b,
        feature_mean=mean,
        feature_scale=scale,
        n_classes=c,
        iterations=iters,
        final_loss=loss,
        l2=config.l2,
        seed=config.seed,
    )


def predict_proba(model: LinearModel, X: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    """Per-sample class distributions, one row per column of ``X``."""
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[0] != model.weights.shape[1]:
        raise InvalidInputError(
            f"feature dimension {data.shape[0]} != model dimension {model.weights.shape[1]}"
        )
    std = (data - model.feature_mean[:, None]) / model.feature_scale[:, None]
    scores = model.weights @ std + model.bias[:, None]
    return _softmax_columns(scores).T


def predict(model: LinearModel, X: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    return np.argmax(predict_proba(model, X), axis=1)


def auroc_macro(
    labels: Sequence[int], probs: np.ndarray
) -> Tuple[float, Dict[int, float], List[int]]:
    """One-vs-rest AUROC per class via the rank-statistic formulation with
    midrank tie handling; macro average over classes present in the labels.

    Returns (macro value, per-class values, excluded class list).  Classes
    with zero positives or zero negatives are excluded and flagged.
    """
    y = np.asarray(labels, dtype=np.int64)
    P = np.asarray(probs, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != y.size:
        raise InvalidInputError("probs must be (n_samples, n_classes)")
    if np.unique(y).size < 2:
        raise InvalidInputError("AUROC needs at least two classes in the labels")
    per_class: Dict[int, float] = {}
    excluded: List[int] = []
    for c in range(P.shape[1]):
        pos = y == c
        n_pos = int(pos.sum())
        n_neg = y.size - n_pos
        if n_pos == 0 or n_neg == 0:
            excluded.append(c)
            continue
        ranks = rankdata(P[:, c], method="average")
        auc = (float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        per_class[c] = float(auc)
    if not per_class:
        raise InvalidInputError("no class had both positives and negatives")
    macro = float(np.mean(list(per_class.values())))
    return macro, per_class, excluded


def accuracy_f1(
    labels: Sequence[int], predictions: Sequence[int]
) -> Tuple[float, float, Dict[int, Dict[str, float]], List[int]]:
    """Accuracy and macro F1 with per-class breakdown.

    Classes whose precision or recall is undefined contribute an F1 of 0 and
    are flagged.  Returns (accuracy, macro_f1, per_class, flagged).
    """
    y = np.asarray(labels, dtype=np.int64)
    yhat = np.asarray(predictions, dtype=np.int64)
    if y.shape != yhat.shape:
        raise InvalidInputError(
            f"{y.size} labels vs {yhat.size} predictions"
        )
    if y.size == 0:
        raise InvalidInputError("empty label vector")
    accuracy = float(np.mean(y == yhat))
    classes = sorted(set(y.tolist()) | set(yhat.tolist()))
    per_class: Dict[int, Dict[str, float]] = {}
    flagged: List[int] = []
    f1s: List[float] = []
    for c in classes:
        tp = int(np.sum((y == c) & (yhat == c)))
        fp = int(np.sum((y != c) & (yhat == c)))
        fn = int(np.sum((y == c) & (yhat != c)))
        support = tp + fn
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        if (tp + fp) == 0 or (tp + fn) == 0:
            flagged.append(c)
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if (precision + recall) > 0
            else 0.0
        )
        f1s.append(f1)
        per_class[c] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": float(support),
        }
    macro_f1 = float(np.mean(f1s))
    return accuracy, macro_f1, per_class, flagged


def evaluate_model(model: LinearModel, test: FeatureMatrix) -> MetricReport:
    """Accuracy, macro F1, and macro one-vs-rest AUROC on a labeled test set."""
    if test.labels is None:
        raise InvalidInputError("evaluation requires test labels")
    probs = predict_proba(model, test)
    preds = np.argmax(probs, axis=1)
    accuracy, macro_f1, per_class, flagged = accuracy_f1(test.labels, preds)
    auroc, auroc_per_class, excluded = auroc_macro(test.labels, probs)
    for c, v in auroc_per_class.items():
        per_class.setdefault(c, {})["auroc"] = v
    degenerate = tuple(sorted(set(flagged) | set(excluded)))
    return MetricReport(
        accuracy=accuracy,
        macro_f1=macro_f1,
        auroc_macro_ovr=auroc,
        per_class=per_class,
        degenerate_classes=degenerate,
    )
