"""Balanced training-set construction, logistic regression, and evaluation.

Training is full-batch gradient descent on mean log-loss with an L2 term,
from zero weights, over internally standardized features; the
standardization vectors are stored in the model and reapplied at
prediction time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError, TrainingDiverged
from .features import FeatureRow
from .util import derive_seed, fmt_float


def split_dataset(
    rows: Sequence[FeatureRow], test_fraction: float, seed: int = 0
) -> tuple[list[FeatureRow], list[FeatureRow]]:
    """Disjoint, exhaustive, label-stratified split; seed-deterministic."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    by_label: dict[int, list[FeatureRow]] = {}
    for row in rows:
        by_label.setdefault(row.label, []).append(row)
    if len(by_label) < 2:
        raise ConfigError("need at least two label classes to split")
    train: list[FeatureRow] = []
    test: list[FeatureRow] = []
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "split")))
    for label in sorted(by_label):
        group = by_label[label]
        order = rng.permutation(len(group))
        n_test = int(round(test_fraction * len(group)))
        if n_test == 0 or n_test >= len(group):
            raise ConfigError(
                f"test_fraction {test_fraction} leaves class {label} empty on one side"
            )
        test.extend(group[i] for i in order[:n_test])
        train.extend(group[i] for i in order[n_test:])
    rng2 = np.random.Generator(np.random.PCG64(derive_seed(seed, "split-shuffle")))
    return (
        [train[i] for i in rng2.permutation(len(train))],
        [test[i] for i in rng2.permutation(len(test))],
    )


def balanced_subsample(
    pos: Sequence[FeatureRow], neg: Sequence[FeatureRow], ratio: float = 1.0, seed: int = 0
) -> list[FeatureRow]:
    """All positives plus ceil(ratio * |pos|) negatives sampled without replacement."""
    if not pos or not neg:
        raise ConfigError("both classes must be non-empty")
    want = math.ceil(ratio * len(pos))
    if want > len(neg):
        warnings.warn(f"only {len(neg)} negatives available; wanted {want}")
        want = len(neg)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "subsample")))
    chosen = rng.permutation(len(neg))[:want]
    out = list(pos) + [neg[i] for i in sorted(chosen)]
    order = rng.permutation(len(out))
    return [out[i] for i in order]


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    feat_mean: np.ndarray
    feat_std: np.ndarray
    feature_mode: str = "integrated"
    lr: float = 0.1
    l2: float = 1e-4
    iterations: int = 0
    seed: int = 0
    threshold: float = 0.5
    loss_history: list = field(default_factory=list)


def _design(rows: Sequence[FeatureRow]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([r.values for r in rows]).astype(np.float64)
    y = np.array([r.label for r in rows], dtype=np.float64)
    return X, y


def train_logreg(
    rows: Sequence[FeatureRow],
    lr: float = 0.1,
    l2: float = 1e-4,
    max_iters: int = 5000,
    tol: float = 1e-6,
    seed: int = 0,
) -> LogRegModel:
    """Full-batch gradient descent on mean log-loss + (l2/2)|w|^2.

    Starts from zero weights and stops at max_iters or when the gradient
    max-norm falls below tol. Constant features standardize with sigma = 1.
    """
    X, y = _design(rows)
    if len(np.unique(y)) < 2:
        raise ConfigError("training rows must contain both classes")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    Xs = (X - mean) / std
    n, d = Xs.shape
    w = np.zeros(d)
    b = 0.0
    model = LogRegModel(w, b, mean, std, rows[0].mode, lr, l2, 0, seed)
    for it in range(max_iters):
        z = Xs @ w + b
        p = 1.0 / (1.0 + np.exp(-np.abs(z)))
        p = np.where(z >= 0, p, 1.0 - p)
        # mean log-loss via the stable softplus identity: loss_i = log(1+e^z) - y z
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
        if not np.isfinite(loss):
            raise TrainingDiverged("non-finite training loss (learning rate too high?)")
        model.loss_history.append(loss)
        grad_w = Xs.T @ (p - y) / n + l2 * w
        grad_b = float(np.mean(p - y))
        gmax = max(float(np.max(np.abs(grad_w))), abs(grad_b))
        if gmax < tol:
            break
        w -= lr * grad_w
        b -= lr * grad_b
    model.weights = w
    model.bias = float(b)
    model.iterations = len(model.loss_history)
    return model


def logreg_loss_and_grad(
    X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float
) -> tuple[float, np.ndarray, float]:
    """Loss and analytic gradient at (w, b) on raw features (no standardization)."""
    z = X @ w + b
    p = 1.0 / (1.0 + np.exp(-np.abs(z)))
    p = np.where(z >= 0, p, 1.0 - p)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    grad_w = X.T @ (p - y) / len(y) + l2 * w
    grad_b = float(np.mean(p - y))
    return loss, grad_w, grad_b


def predict(model: LogRegModel, rows: Sequence[FeatureRow]) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (probability, label); label = probability >= threshold."""
    X, _ = _design(rows)
    if X.shape[1] != len(model.weights):
        raise ConfigError(
            f"feature length {X.shape[1]} does not match model ({len(model.weights)})"
        )
    z = (X - model.feat_mean) / model.feat_std @ model.weights + model.bias
    p = 1.0 / (1.0 + np.exp(-np.abs(z)))
    p = np.where(z >= 0, p, 1.0 - p)
    return p, (p >= model.threshold).astype(np.int64)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    fpr_actual: float  # FP / (FP + TN)
    fnr: float  # FN / (FN + TP) = 1 - recall
    fdr: float  # FP / (FP + TP) = 1 - precision
    degenerate: tuple = ()


def evaluate(predictions: Sequence[int], truths: Sequence[int]) -> ConfusionMatrix:
    """Exact confusion counts and derived rates; 0/0 rates report 0 and are flagged."""
    preds = np.asarray(predictions, dtype=np.int64)
    ys = np.asarray(truths, dtype=np.int64)
    if preds.shape != ys.shape or len(preds) == 0:
        raise ConfigError("predictions and truths must have equal nonzero length")
    tp = int(np.sum((preds == 1) & (ys == 1)))
    fp = int(np.sum((preds == 1) & (ys == 0)))
    tn = int(np.sum((preds == 0) & (ys == 0)))
    fn = int(np.sum((preds == 0) & (ys == 1)))
    flags = []

    def rate(num, den, name):
        if den == 0:
            flags.append(name)
            return 0.0
        return num / den

    precision = rate(tp, tp + fp, "precision")
    recall = rate(tp, tp + fn, "recall")
    return ConfusionMatrix(
        tp,
        fp,
        tn,
        fn,
        (tp + tn) / len(preds),
        precision,
        recall,
        rate(fp, fp + tn, "fpr_actual"),
        1.0 - recall if (tp + fn) else 0.0,
        rate(fp, fp + tp, "fdr"),
        tuple(flags),
    )


def save_model(model: LogRegModel, path: str | Path) -> None:
    """Flat key/value text: weights, bias, standardization vectors, mode, seed."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"mode {model.feature_mode}\n")
        fh.write(f"seed {model.seed}\n")
        fh.write(f"lr {fmt_float(model.lr)}\n")
        fh.write(f"l2 {fmt_float(model.l2)}\n")
        fh.write(f"iterations {model.iterations}\n")
        fh.write(f"threshold {fmt_float(model.threshold)}\n")
        fh.write(f"bias {fmt_float(model.bias)}\n")
        for key, vec in (
            ("weights", model.weights),
            ("feat_mean", model.feat_mean),
            ("feat_std", model.feat_std),
        ):
            fh.write(key + " " + " ".join(fmt_float(x) for x in vec) + "\n")


def load_model(path: str | Path) -> LogRegModel:
    fields: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.rstrip("\n").partition(" ")
            fields[key] = value
    try:
        vec = lambda key: np.array([float(x) for x in fields[key].split()])
        return LogRegModel(
            weights=vec("weights"),
            bias=float(fields["bias"]),
            feat_mean=vec("feat_mean"),
            feat_std=vec("feat_std"),
            feature_mode=fields["mode"],
            lr=float(fields["lr"]),
            l2=float(fields["l2"]),
            iterations=int(fields["iterations"]),
            seed=int(fields["seed"]),
            threshold=float(fields["threshold"]),
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing model field {exc}") from None


def metrics_report(cm: ConfusionMatrix) -> str:
    """Machine-parsable key/value lines plus a 2x2 count block."""
    lines = [
        f"accuracy {fmt_float(cm.accuracy)}",
        f"precision {fmt_float(cm.precision)}",
        f"recall {fmt_float(cm.recall)}",
        f"fpr_actual {fmt_float(cm.fpr_actual)}",
        f"fnr {fmt_float(cm.fnr)}",
        f"fdr {fmt_float(cm.fdr)}",
        f"degenerate {','.join(cm.degenerate) if cm.degenerate else '-'}",
        "counts pred_pos pred_neg",
        f"truth_pos {cm.tp} {cm.fn}",
        f"truth_neg {cm.fp} {cm.tn}",
    ]
    return "\n".join(lines) + "\n"


def parse_metrics_report(text: str) -> dict:
    out: dict[str, float] = {}
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] in (
            "accuracy",
            "precision",
            "recall",
            "fpr_actual",
            "fnr",
            "fdr",
        ):
            out[parts[0]] = float(parts[1])
        elif parts[:1] == ["truth_pos"]:
            out["tp"], out["fn"] = int(parts[1]), int(parts[2])
        elif parts[:1] == ["truth_neg"]:
            out["fp"], out["tn"] = int(parts[1]), int(parts[2])
    return out
