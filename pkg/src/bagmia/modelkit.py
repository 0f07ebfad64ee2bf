"""Small differentiable classifiers that stand in for full-scale targets.

Two architectures: plain softmax regression, and a one-hidden-layer ReLU
network. Both are trained with mini-batch Adam on cross-entropy plus an L2
weight penalty (biases unpenalized). Training is bitwise deterministic for
a fixed (spec, data): initialization, shuffling, and batch order all derive
from ``spec.seed``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .errors import ArgumentError, DataFormatError, NumericError

ARCHITECTURES = ("softmax", "mlp")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ModelSpec:
    """Architecture and training hyperparameters for one classifier."""

    architecture: str = "softmax"
    hidden_width: int = 16  # mlp only
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3
    l2_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ArgumentError(f"unknown architecture {self.architecture!r}, expected one of {ARCHITECTURES}")
        if self.epochs < 1:
            raise ArgumentError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be positive")
        if self.l2_penalty < 0:
            raise ArgumentError("l2_penalty must be non-negative")
        if self.architecture == "mlp" and self.hidden_width < 1:
            raise ArgumentError("hidden_width must be at least 1")


@dataclass(eq=False)
class Classifier:
    """Trained weights plus the spec that produced them. Immutable by convention."""

    spec: ModelSpec
    input_dim: int
    class_count: int
    weights: list[np.ndarray]  # declared layer order, float64
    epoch_losses: list[float] = field(default_factory=list)  # full-data loss per epoch start, then final

    def weights_equal(self, other: "Classifier") -> bool:
        return len(self.weights) == len(other.weights) and all(
            np.array_equal(a, b) for a, b in zip(self.weights, other.weights)
        )


def _softmax(z: np.ndarray) -> np.ndarray:
    # max-subtraction keeps exp() in range for any finite logits
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _weight_shapes(arch: str, dim: int, class_count: int, hidden_width: int):
    if arch == "softmax":
        return [(dim, class_count), (class_count,)]
    return [(dim, hidden_width), (hidden_width,), (hidden_width, class_count), (class_count,)]


def _init_weights(spec: ModelSpec, dim: int, class_count: int, rng: np.random.Generator):
    weights = []
    for shape in _weight_shapes(spec.architecture, dim, class_count, spec.hidden_width):
        if len(shape) == 1:
            weights.append(np.zeros(shape))
        else:
            fan_in, fan_out = shape
            a = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-a, a, size=shape))
    return weights


def _forward(weights, arch: str, x: np.ndarray):
    """Return (logits, hidden pre-activation or None)."""
    if arch == "softmax":
        w, b = weights
        return x @ w + b, None
    w1, b1, w2, b2 = weights
    pre = x @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    return hidden @ w2 + b2, pre


def loss_and_grads(weights, arch: str, x: np.ndarray, labels: np.ndarray, l2_penalty: float):
    """Cross-entropy plus ``l2_penalty * sum(W**2)`` over weight matrices, with
    analytic gradients in declared layer order.

    The cross-entropy term is the batch mean of ``-log p_label``; biases are
    excluded from the penalty.
    """
    n = x.shape[0]
    logits, pre = _forward(weights, arch, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    ce = float(np.mean(log_z - shifted[np.arange(n), labels]))
    probs = _softmax(logits)
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    if arch == "softmax":
        w, _ = weights
        loss = ce + l2_penalty * float(np.sum(w * w))
        grads = [x.T @ delta + 2.0 * l2_penalty * w, delta.sum(axis=0)]
        return loss, grads
    w1, _, w2, _ = weights
    hidden = np.maximum(pre, 0.0)
    loss = ce + l2_penalty * (float(np.sum(w1 * w1)) + float(np.sum(w2 * w2)))
    g_w2 = hidden.T @ delta + 2.0 * l2_penalty * w2
    g_b2 = delta.sum(axis=0)
    d_hidden = (delta @ w2.T) * (pre > 0.0)
    g_w1 = x.T @ d_hidden + 2.0 * l2_penalty * w1
    g_b1 = d_hidden.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2]


def _full_loss(weights, arch, x, labels, l2_penalty):
    loss, _ = loss_and_grads(weights, arch, x, labels, l2_penalty)
    return loss


def train_classifier(spec: ModelSpec, data: LabeledDataset) -> Classifier:
    """Fit a classifier by mini-batch Adam; deterministic for fixed (spec, data).

    The last incomplete mini-batch is trained on, not dropped. Raises
    ``NumericError`` naming the epoch if the loss goes non-finite.
    """
    if data.n_points == 0:
        raise ArgumentError("cannot train on an empty dataset")
    x, labels = data.points, data.labels
    n = data.n_points
    rng = np.random.default_rng(spec.seed)
    weights = _init_weights(spec, data.dim, data.class_count, rng)
    m = [np.zeros_like(w) for w in weights]
    v = [np.zeros_like(w) for w in weights]
    step = 0
    epoch_losses: list[float] = []
    # divergence shows up as a non-finite loss, caught below; don't also warn
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(spec.epochs):
            epoch_losses.append(_full_loss(weights, spec.architecture, x, labels, spec.l2_penalty))
            if not np.isfinite(epoch_losses[-1]):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            order = rng.permutation(n)
            for start in range(0, n, spec.batch_size):
                batch = order[start : start + spec.batch_size]
                loss, grads = loss_and_grads(
                    weights, spec.architecture, x[batch], labels[batch], spec.l2_penalty
                )
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite loss at epoch {epoch}")
                step += 1
                c1 = 1.0 - ADAM_BETA1**step
                c2 = 1.0 - ADAM_BETA2**step
                for i, g in enumerate(grads):
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * (g * g)
                    weights[i] = weights[i] - spec.learning_rate * (m[i] / c1) / (np.sqrt(v[i] / c2) + ADAM_EPS)
        epoch_losses.append(_full_loss(weights, spec.architecture, x, labels, spec.l2_penalty))
    return Classifier(spec, data.dim, data.class_count, weights, epoch_losses)


def predict_confidences(model: Classifier, points: np.ndarray) -> np.ndarray:
    """Softmax outputs, one row per point; rows sum to 1 and are strictly positive."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != model.input_dim:
        raise ArgumentError(f"points must have shape (*, {model.input_dim})")
    logits, _ = _forward(model.weights, model.spec.architecture, points)
    return _softmax(logits)


def task_accuracy(model: Classifier, data: LabeledDataset) -> float:
    """Fraction of argmax matches; ties break toward the lowest class index."""
    if data.n_points == 0:
        raise ArgumentError("accuracy of an empty dataset is undefined")
    predicted = np.argmax(predict_confidences(model, data.points), axis=1)
    return float(np.mean(predicted == data.labels))


def save_classifier(model: Classifier, path) -> Path:
    """JSON header line, then raw little-endian float32 weights in layer order."""
    header = {
        "input_dim": model.input_dim,
        "class_count": model.class_count,
        **asdict(model.spec),
    }
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for w in model.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
    return path


def load_classifier(path) -> Classifier:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: bad model header: {exc}") from None
    try:
        input_dim = header.pop("input_dim")
        class_count = header.pop("class_count")
        spec = ModelSpec(**header)
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: incomplete model header: {exc}") from None
    shapes = _weight_shapes(spec.architecture, input_dim, class_count, spec.hidden_width)
    expected = 4 * sum(int(np.prod(s)) for s in shapes)
    if len(payload) != expected:
        raise DataFormatError(f"{path}: expected {expected} weight bytes, found {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    weights = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        weights.append(flat[offset : offset + size].reshape(shape).copy())
        offset += size
    return Classifier(spec, input_dim, class_count, weights)
