"""Labeled datasets: synthesis, CSV ingestion, and positional slicing.

Feature values are held as float64 internally and serialized as text with
9 significant digits. ``class_count`` is fixed at creation time and never
re-inferred from subsets, so models trained on any slice still emit
full-width confidence vectors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataFormatError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Immutable feature matrix with integer class labels and stable point ids."""

    points: np.ndarray  # (N, D) float64
    labels: np.ndarray  # (N,) int64 in [0, class_count)
    class_count: int
    point_ids: np.ndarray  # (N,) int64, unique; preserved under subsetting

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        ids = np.ascontiguousarray(self.point_ids, dtype=np.int64)
        if points.ndim != 2:
            raise ArgumentError("points must be a 2-D array")
        n = points.shape[0]
        if labels.shape != (n,) or ids.shape != (n,):
            raise ArgumentError("points, labels, and point_ids must share length")
        if self.class_count < 1:
            raise ArgumentError("class_count must be at least 1")
        if n and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ArgumentError(f"labels must lie in [0, {self.class_count})")
        if np.unique(ids).size != n:
            raise ArgumentError("point_ids must be unique")
        for name, arr in (("points", points), ("labels", labels), ("point_ids", ids)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def equals(self, other: "LabeledDataset", rtol: float = 0.0) -> bool:
        """Field-wise equality; ``rtol`` relaxes the feature comparison."""
        if self.class_count != other.class_count:
            return False
        if self.points.shape != other.points.shape:
            return False
        if not (np.array_equal(self.labels, other.labels) and np.array_equal(self.point_ids, other.point_ids)):
            return False
        if rtol == 0.0:
            return np.array_equal(self.points, other.points)
        return np.allclose(self.points, other.points, rtol=rtol, atol=0.0)


def synth_gaussian_mixture(
    class_count: int, per_class: int, dim: int, separation: float, seed: int
) -> LabeledDataset:
    """Draw a unit-variance Gaussian mixture with one seeded center per class.

    Each center is a random direction scaled by ``separation``; class priors
    are exactly uniform (``per_class`` points per label). Deterministic for
    fixed arguments.
    """
    if class_count < 2:
        raise ArgumentError("class_count must be at least 2")
    if per_class < 1:
        raise ArgumentError("per_class must be at least 1")
    if dim < 1:
        raise ArgumentError("dim must be at least 1")
    if separation < 0:
        raise ArgumentError("separation must be non-negative")
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(class_count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    centers = separation * directions
    points = np.concatenate(
        [centers[c] + rng.normal(size=(per_class, dim)) for c in range(class_count)]
    )
    labels = np.repeat(np.arange(class_count), per_class)
    return LabeledDataset(points, labels, class_count, np.arange(class_count * per_class))


def load_csv(path, label_column: int, skip_header: bool = False) -> LabeledDataset:
    """Load a comma-separated dataset; one row per point, labels in one column.

    Rows must be rectangular, features must parse as reals, and labels as
    non-negative integers. ``class_count`` becomes ``max label + 1`` and
    point ids are assigned 0..N-1 in file order. Parse failures name the
    offending row and column (1-based, counting the header if present).
    """
    path = Path(path)
    features: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row_number, row in enumerate(reader, start=1):
            if row_number == 1 and skip_header:
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise DataFormatError(f"{path}: row {row_number}: need at least 2 columns, found {width}")
                if not 0 <= label_column < width:
                    raise ArgumentError(f"label_column {label_column} out of range for {width}-column file")
            if len(row) != width:
                raise DataFormatError(
                    f"{path}: row {row_number}: ragged row, expected {width} columns, found {len(row)}"
                )
            feat_row = []
            for col, cell in enumerate(row):
                if col == label_column:
                    try:
                        label = int(cell)
                    except ValueError:
                        raise DataFormatError(
                            f"{path}: row {row_number}, column {col + 1}: label {cell!r} is not an integer"
                        ) from None
                    if label < 0:
                        raise DataFormatError(
                            f"{path}: row {row_number}, column {col + 1}: label {label} is negative"
                        )
                    labels.append(label)
                else:
                    try:
                        feat_row.append(float(cell))
                    except ValueError:
                        raise DataFormatError(
                            f"{path}: row {row_number}, column {col + 1}: {cell!r} is not a number"
                        ) from None
            features.append(feat_row)
    if not features:
        raise DataFormatError(f"{path}: empty file, no data rows")
    class_count = max(labels) + 1
    return LabeledDataset(
        np.asarray(features, dtype=np.float64),
        np.asarray(labels, dtype=np.int64),
        class_count,
        np.arange(len(features)),
    )


def write_csv(data: LabeledDataset, path) -> Path:
    """Write features at 9 significant digits with the label as the last column."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row, label in zip(data.points, data.labels):
            fh.write(",".join(f"{v:.9g}" for v in row))
            fh.write(f",{label}\n")
    return path


def subset(data: LabeledDataset, indices) -> LabeledDataset:
    """Slice by position, preserving original point_ids and class_count."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size:
        if idx.min() < 0 or idx.max() >= data.n_points:
            raise ArgumentError("subset index out of range")
        if np.unique(idx).size != idx.size:
            raise ArgumentError("duplicate subset index")
    return LabeledDataset(
        data.points[idx], data.labels[idx], data.class_count, data.point_ids[idx]
    )
