"""Summary-feature terrain classification baseline.

A contact signal is reduced to 24 features (per-channel mean, std, min, max)
and classified with multinomial logistic regression trained by full-batch
gradient descent on the cross-entropy loss. Deterministic given a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np


@dataclass
class StepSignal:
    """One contact's force/torque recording, samples (length, 6)."""

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.array(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[1] != 6 or len(self.samples) == 0:
            raise ValueError(f"signal samples must be (length>=1, 6), got {self.samples.shape}")
        if not np.isfinite(self.samples).all():
            raise ValueError("signal contains non-finite samples")

    @property
    def length(self) -> int:
        return len(self.samples)


def featurize(signal: StepSignal) -> np.ndarray:
    """24-vector: channel means, population stds, minima, maxima, in that order."""
    s = signal.samples
    return np.concatenate([s.mean(axis=0), s.std(axis=0), s.min(axis=0), s.max(axis=0)])


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(weights, bias, features, labels, n_classes: int):
    """Mean cross-entropy of the logistic model and its analytic gradients.

    features is (B, F) already standardized, labels an int vector (B,).
    Returns (loss, d_weights, d_bias).
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    logits = features @ weights.T + bias
    probs = _softmax_rows(logits)
    b = len(labels)
    loss = -np.mean(np.log(probs[np.arange(b), labels]))
    delta = probs.copy()
    delta[np.arange(b), labels] -= 1.0
    delta /= b
    return float(loss), delta.T @ features, delta.sum(axis=0)


@dataclass
class LogisticBaseline:
    """Trained multinomial logistic regression over standardized features."""

    weights: np.ndarray
    bias: np.ndarray
    feat_mean: np.ndarray
    feat_std: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.bias)

    def standardize(self, features) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.feat_mean) / self.feat_std


def baseline_train(
    signals,
    labels,
    n_classes: int = 8,
    seed: int = 0,
    learning_rate: float = 0.5,
    epochs: int = 400,
) -> LogisticBaseline:
    """Fit the baseline on labeled signals with full-batch gradient descent."""
    labels = np.asarray(labels, dtype=int)
    if len(signals) != len(labels) or len(labels) == 0:
        raise ValueError("need equally many signals and labels, at least one")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    feats = np.stack([featurize(s) for s in signals])
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std < 1e-12] = 1.0
    x = (feats - mean) / std

    rng = np.random.default_rng(seed)
    w = 0.01 * rng.standard_normal((n_classes, x.shape[1]))
    b = np.zeros(n_classes)
    for _ in range(epochs):
        _, dw, db = loss_and_grad(w, b, x, labels, n_classes)
        w -= learning_rate * dw
        b -= learning_rate * db
    return LogisticBaseline(w, b, mean, std)


def baseline_predict(model: LogisticBaseline, signal: StepSignal) -> np.ndarray:
    """Class probability vector for one signal."""
    x = model.standardize(featurize(signal))
    return _softmax_rows((x @ model.weights.T + model.bias)[None, :])[0]


def baseline_predict_many(model: LogisticBaseline, signals) -> np.ndarray:
    x = model.standardize(np.stack([featurize(s) for s in signals]))
    return _softmax_rows(x @ model.weights.T + model.bias)


def save_baseline(model: LogisticBaseline, path) -> None:
    blob = {
        "format": "hapticloc-baseline-1",
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "feat_mean": model.feat_mean.tolist(),
        "feat_std": model.feat_std.tolist(),
    }
    with open(path, "w") as f:
        json.dump(blob, f)


def load_baseline(path) -> LogisticBaseline:
    with open(path) as f:
        blob = json.load(f)
    if blob.get("format") != "hapticloc-baseline-1":
        raise ValueError(f"{path}: not a baseline model file")
    return LogisticBaseline(
        np.array(blob["weights"], dtype=float),
        np.array(blob["bias"], dtype=float),
        np.array(blob["feat_mean"], dtype=float),
        np.array(blob["feat_std"], dtype=float),
    )


def material_names() -> list[str]:
    """Terrain material for each class id, from the packaged table."""
    text = resources.files("hapticloc").joinpath("data/materials.txt").read_text()
    table = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        idx, name = line.split(maxsplit=1)
        table[int(idx)] = name.strip()
    return [table[i] for i in range(len(table))]
