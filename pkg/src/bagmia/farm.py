"""Train every model of a plan and extract the (N, k, C) confidence tensor.

Model j trains on its plan column with a seed mixed from (spec.seed, j),
so a ModelSet is a pure function of (plan, spec, data) at any parallelism
level. Confidences are stored at float32; downstream attack training
consumes them as-is.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .allocator import AllocationPlan, training_indices
from .dataset import LabeledDataset, subset
from .errors import ArgumentError, DataFormatError, NumericError
from .modelkit import Classifier, ModelSpec, predict_confidences, task_accuracy, train_classifier
from .seeding import mix_seed


@dataclass(eq=False)
class ModelSet:
    """k trained classifiers, the plan that defined them, and per-model stats."""

    plan: AllocationPlan
    models: list[Classifier]
    train_accuracies: np.ndarray  # accuracy on each model's own training split
    train_seconds: np.ndarray

    @property
    def class_count(self) -> int:
        return self.models[0].class_count

    @property
    def input_dim(self) -> int:
        return self.models[0].input_dim


@dataclass(eq=False)
class ConfidenceTensor:
    """(N, k, C) confidences with the plan's membership matrix as In/Out labels."""

    values: np.ndarray  # (N, k, C) float32
    membership: np.ndarray  # (N, k) bool
    plan_seed: int

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ArgumentError("tensor values must be 3-D (points, models, classes)")
        if self.membership.shape != self.values.shape[:2]:
            raise ArgumentError("membership shape must match (points, models)")

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def n_models(self) -> int:
        return self.values.shape[1]

    @property
    def class_count(self) -> int:
        return self.values.shape[2]


def per_model_seed(base_seed: int, model_index: int) -> int:
    """Stable training seed for one model of a set."""
    return mix_seed(base_seed, model_index)


def train_model_set(
    plan: AllocationPlan, spec: ModelSpec, data: LabeledDataset, parallelism: int = 1
) -> ModelSet:
    """Train one classifier per plan column; identical results for any parallelism."""
    if plan.n_points != data.n_points:
        raise ArgumentError(f"plan covers {plan.n_points} points but dataset has {data.n_points}")
    if parallelism < 1:
        raise ArgumentError("parallelism must be at least 1")

    def build(j: int):
        idx = training_indices(plan, j)
        if idx.size == 0:
            raise ArgumentError(f"model {j}: training split is empty")
        split = subset(data, idx)
        model_spec = replace(spec, seed=per_model_seed(spec.seed, j))
        start = time.perf_counter()
        try:
            model = train_classifier(model_spec, split)
        except NumericError as exc:
            raise NumericError(f"model {j}: {exc}") from exc
        elapsed = time.perf_counter() - start
        return model, task_accuracy(model, split), elapsed

    k = plan.n_models
    results: list = [None] * k
    if parallelism == 1:
        for j in range(k):
            results[j] = build(j)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = {j: pool.submit(build, j) for j in range(k)}
            for j, future in futures.items():
                results[j] = future.result()
    models = [r[0] for r in results]
    accuracies = np.array([r[1] for r in results])
    seconds = np.array([r[2] for r in results])
    return ModelSet(plan, models, accuracies, seconds)


def extract_confidence_tensor(models: ModelSet, data: LabeledDataset) -> ConfidenceTensor:
    """Stack predict_confidences over all models; fibre (i, j) is model j on point i."""
    plan = models.plan
    if plan.n_points != data.n_points:
        raise ArgumentError(f"plan covers {plan.n_points} points but dataset has {data.n_points}")
    if models.input_dim != data.dim:
        raise ArgumentError(f"models expect dim {models.input_dim}, dataset has {data.dim}")
    values = np.empty((data.n_points, plan.n_models, models.class_count), dtype=np.float32)
    for j, model in enumerate(models.models):
        values[:, j, :] = predict_confidences(model, data.points)
    return ConfidenceTensor(values, plan.membership.copy(), plan.seed)


def save_tensor(tensor: ConfidenceTensor, path) -> Path:
    """JSON header, float32 little-endian payload in (point, model, class) order,
    then the membership bitmap."""
    n, k, c = tensor.values.shape
    header = {"n": n, "k": k, "c": c, "dtype": "f32le", "plan_seed": tensor.plan_seed}
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(tensor.values, dtype="<f4").tobytes())
        fh.write(np.packbits(tensor.membership.reshape(-1), bitorder="little").tobytes())
    return path


def load_tensor(path) -> ConfidenceTensor:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode())
        n, k, c = header["n"], header["k"], header["c"]
        plan_seed = header["plan_seed"]
        dtype = header["dtype"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
        raise DataFormatError(f"{path}: bad tensor header: {exc}") from None
    if dtype != "f32le":
        raise DataFormatError(f"{path}: unsupported dtype {dtype!r}")
    value_bytes = 4 * n * k * c
    bitmap_bytes = (n * k + 7) // 8
    if len(payload) != value_bytes + bitmap_bytes:
        raise DataFormatError(
            f"{path}: expected {value_bytes + bitmap_bytes} payload bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload[:value_bytes], dtype="<f4").reshape(n, k, c).copy()
    bits = np.unpackbits(
        np.frombuffer(payload[value_bytes:], dtype=np.uint8), count=n * k, bitorder="little"
    )
    membership = bits.reshape(n, k).astype(bool)
    return ConfidenceTensor(values, membership, plan_seed)


def tensor_roundtrip(tensor: ConfidenceTensor, path) -> ConfidenceTensor:
    """Save then reload; values survive at float32 precision, metadata exactly."""
    return load_tensor(save_tensor(tensor, path))
