"""Membership attack models over confidence vectors.

One weighted logistic regression per point (each point's k confidence
fibres, labeled In/Out by the plan) and one per class (all fibres of a
class pooled). The In/Out split is usually heavily imbalanced - a point
is In exactly p of k models - so inverse-frequency sample weights give
each side total weight 1/2.

Fitting is full-batch gradient descent from zero initialization for a
fixed iteration count: bitwise deterministic, and cheap at confidence
dimension C.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataset import LabeledDataset
from .errors import ArgumentError, DataFormatError, DegenerateLabelsError
from .farm import ConfidenceTensor

WEIGHTING_SCHEMES = ("inverse-frequency", "none")


@dataclass(frozen=True)
class LogRegConfig:
    """Hyperparameters for the attack-model fits. Intercept is unpenalized."""

    l2_penalty: float = 1e-3
    learning_rate: float = 0.1
    iterations: int = 500
    class_weighting: str = "inverse-frequency"

    def __post_init__(self):
        if self.l2_penalty < 0:
            raise ArgumentError("l2_penalty must be non-negative")
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be positive")
        if self.iterations < 1:
            raise ArgumentError("iterations must be at least 1")
        if self.class_weighting not in WEIGHTING_SCHEMES:
            raise ArgumentError(f"class_weighting must be one of {WEIGHTING_SCHEMES}")


@dataclass(eq=False)
class PointAttackModel:
    """Per-point membership model: C feature weights plus intercept."""

    point_id: int
    weights: np.ndarray  # (C + 1,), intercept last
    in_count: int
    out_count: int


@dataclass(eq=False)
class ClassAttackModel:
    """Per-class membership model over pooled confidence fibres."""

    class_id: int
    weights: np.ndarray  # (C + 1,), intercept last
    in_count: int
    out_count: int


def _fit_batch(x: np.ndarray, y: np.ndarray, sample_weights: np.ndarray, config: LogRegConfig) -> np.ndarray:
    """Fit M independent logistic regressions by full-batch gradient descent.

    Parameters
    ----------
    x : (M, rows, C) float64 features.
    y : (M, rows) float64 binary labels.
    sample_weights : (M, rows) float64, each row of weights summing to 1.

    Returns
    -------
    (M, C + 1) fitted weights, intercept last. The objective per problem is
    the weighted cross-entropy plus ``l2_penalty * ||w||^2`` (intercept
    excluded); exactly ``config.iterations`` steps from zero initialization.
    """
    n_problems, _, n_features = x.shape
    w = np.zeros((n_problems, n_features))
    b = np.zeros(n_problems)
    lr = config.learning_rate
    lam = config.l2_penalty
    for _ in range(config.iterations):
        z = np.matmul(x, w[:, :, None])[:, :, 0] + b[:, None]
        residual = sample_weights * (expit(z) - y)
        grad_w = np.matmul(residual[:, None, :], x)[:, 0, :] + 2.0 * lam * w
        grad_b = residual.sum(axis=1)
        w -= lr * grad_w
        b -= lr * grad_b
    return np.concatenate([w, b[:, None]], axis=1)


def _sample_weights(y: np.ndarray, scheme: str) -> np.ndarray:
    """Per-row weights for an (M, rows) binary label array, each row summing to 1."""
    rows = y.shape[1]
    if scheme == "none":
        return np.full(y.shape, 1.0 / rows)
    n_in = y.sum(axis=1)
    in_w = np.divide(0.5, n_in, out=np.zeros_like(n_in, dtype=float), where=n_in > 0)
    out_w = np.divide(0.5, rows - n_in, out=np.zeros_like(n_in, dtype=float), where=n_in < rows)
    return np.where(y > 0.5, in_w[:, None], out_w[:, None])


def fit_weighted_logreg(
    features: np.ndarray, labels: np.ndarray, config: LogRegConfig, seed: int = 0
) -> np.ndarray:
    """Fit one binary logistic regression; returns C+1 weights, intercept last.

    Deterministic: zero initialization and full-batch steps leave nothing
    for ``seed`` to randomize (kept for interface stability). Under
    inverse-frequency weighting each label class receives total weight 1/2.
    """
    del seed
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ArgumentError("features must be (rows, C) with one label per row")
    if not np.isfinite(x).all():
        raise ArgumentError("features must be finite")
    n_in = int(y.sum())
    if config.class_weighting == "inverse-frequency" and (n_in == 0 or n_in == y.size):
        raise DegenerateLabelsError("inverse-frequency weighting needs both labels present")
    weights = _sample_weights(y[None, :], config.class_weighting)
    return _fit_batch(x[None, :, :], y[None, :], weights, config)[0]


def train_point_attacks(
    tensor: ConfidenceTensor, config: LogRegConfig, chunk_size: int = 2048
) -> list[PointAttackModel]:
    """One attack model per point, fit on its k fibres with plan labels.

    Points are processed in fixed-size chunks of vectorized full-batch
    descent; results are independent of the chunking.
    """
    in_counts = tensor.membership.sum(axis=1)
    k = tensor.n_models
    if in_counts.min() == 0 or in_counts.max() == k:
        raise DegenerateLabelsError(
            f"plan (seed {tensor.plan_seed}) gives some point 0 or k In labels; need 1 <= p <= k-1"
        )
    models: list[PointAttackModel] = []
    for start in range(0, tensor.n_points, chunk_size):
        stop = min(start + chunk_size, tensor.n_points)
        x = tensor.values[start:stop].astype(np.float64)
        y = tensor.membership[start:stop].astype(np.float64)
        fitted = _fit_batch(x, y, _sample_weights(y, config.class_weighting), config)
        for offset, row in enumerate(fitted):
            i = start + offset
            models.append(PointAttackModel(i, row, int(in_counts[i]), int(k - in_counts[i])))
    return models


def train_class_attacks(
    tensor: ConfidenceTensor, data: LabeledDataset, config: LogRegConfig
) -> list[ClassAttackModel]:
    """One attack model per class, fit on the pooled fibres of that class."""
    if data.n_points != tensor.n_points:
        raise ArgumentError(f"tensor covers {tensor.n_points} points but dataset has {data.n_points}")
    if data.class_count != tensor.class_count:
        raise ArgumentError(
            f"dataset has {data.class_count} classes but confidences are {tensor.class_count}-dimensional"
        )
    models: list[ClassAttackModel] = []
    for c in range(data.class_count):
        rows = np.flatnonzero(data.labels == c)
        if rows.size == 0:
            raise DegenerateLabelsError(f"class {c}: no points in the dataset")
        x = tensor.values[rows].reshape(-1, tensor.class_count).astype(np.float64)
        y = tensor.membership[rows].reshape(-1).astype(np.float64)
        n_in = int(y.sum())
        if n_in == 0 or n_in == y.size:
            raise DegenerateLabelsError(f"class {c}: pooled rows carry only one membership label")
        weights = _sample_weights(y[None, :], config.class_weighting)
        fitted = _fit_batch(x[None, :, :], y[None, :], weights, config)[0]
        models.append(ClassAttackModel(c, fitted, n_in, int(y.size - n_in)))
    return models


def attack_decision(weights: np.ndarray, confidence: np.ndarray) -> tuple[float, str]:
    """Sigmoid score for one confidence vector; In at score >= 0.5 (inclusive)."""
    weights = np.asarray(weights, dtype=np.float64)
    confidence = np.asarray(confidence, dtype=np.float64)
    if confidence.shape != (weights.shape[0] - 1,):
        raise ArgumentError(f"confidence must have length {weights.shape[0] - 1}")
    score = float(expit(weights[:-1] @ confidence + weights[-1]))
    return score, ("In" if score >= 0.5 else "Out")


class PointAttackScorer:
    """Scores each point of a dataset with its own attack model."""

    def __init__(self, models: Sequence[PointAttackModel], name: str = "point_attack"):
        self.name = name
        ordered = sorted(models, key=lambda m: m.point_id)
        present = {m.point_id for m in ordered}
        missing = next((i for i in range(len(ordered)) if i not in present), None)
        if missing is not None or len(present) != len(ordered):
            raise ArgumentError(f"point attack models must cover ids 0..N-1; missing point {missing}")
        stacked = np.stack([m.weights for m in ordered])
        self.weights = stacked[:, :-1]
        self.intercepts = stacked[:, -1]

    def __call__(self, confidences: np.ndarray, target_index: int) -> np.ndarray:
        del target_index
        if confidences.shape != self.weights.shape:
            raise ArgumentError(f"expected confidences of shape {self.weights.shape}")
        return expit(np.sum(confidences * self.weights, axis=1) + self.intercepts)


class ClassAttackScorer:
    """Scores every point with the attack model of its class."""

    def __init__(self, models: Sequence[ClassAttackModel], labels: np.ndarray, name: str = "class_attack"):
        self.name = name
        ordered = sorted(models, key=lambda m: m.class_id)
        present = {m.class_id for m in ordered}
        missing = next((c for c in range(len(ordered)) if c not in present), None)
        if missing is not None or len(present) != len(ordered):
            raise ArgumentError(f"class attack models must cover ids 0..C-1; missing class {missing}")
        stacked = np.stack([m.weights for m in ordered])
        labels = np.asarray(labels, dtype=np.int64)
        if labels.max() >= len(ordered):
            raise ArgumentError("a dataset label has no attack model")
        self.weights = stacked[labels, :-1]
        self.intercepts = stacked[labels, -1]

    def __call__(self, confidences: np.ndarray, target_index: int) -> np.ndarray:
        del target_index
        if confidences.shape != self.weights.shape:
            raise ArgumentError(f"expected confidences of shape {self.weights.shape}")
        return expit(np.sum(confidences * self.weights, axis=1) + self.intercepts)


def _dump_models(models, id_field: str, config: LogRegConfig, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for m in models:
            record = {
                id_field: getattr(m, id_field),
                "weights": [float(v) for v in m.weights],
                "in_count": m.in_count,
                "out_count": m.out_count,
                "config": asdict(config),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def save_point_attacks(models: Sequence[PointAttackModel], config: LogRegConfig, path) -> Path:
    """One JSON line per model."""
    return _dump_models(models, "point_id", config, path)


def save_class_attacks(models: Sequence[ClassAttackModel], config: LogRegConfig, path) -> Path:
    return _dump_models(models, "class_id", config, path)


def _load_models(path, id_field: str, factory):
    models = []
    config = None
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                models.append(
                    factory(
                        record[id_field],
                        np.asarray(record["weights"], dtype=np.float64),
                        record["in_count"],
                        record["out_count"],
                    )
                )
                config = LogRegConfig(**record["config"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataFormatError(f"{path}: line {line_number}: bad attack record: {exc}") from None
    if not models:
        raise DataFormatError(f"{path}: no attack models found")
    return models, config


def load_point_attacks(path) -> tuple[list[PointAttackModel], LogRegConfig]:
    return _load_models(path, "point_id", PointAttackModel)


def load_class_attacks(path) -> tuple[list[ClassAttackModel], LogRegConfig]:
    return _load_models(path, "class_id", ClassAttackModel)
