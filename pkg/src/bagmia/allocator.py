"""Membership plans: which points train which models.

Reference plans put every point in exactly p of k models, drawn uniformly
and independently per point. Target plans come in complementary pairs:
each pair splits the point set into two equal halves, one half per model,
so every point lands in exactly half of the target models.

The draw for point (or pair) i uses a random stream keyed by (seed, i),
so a plan is bitwise reproducible regardless of construction order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataFormatError

REFERENCE = "reference"
TARGET = "target"


@dataclass(frozen=True, eq=False)
class AllocationPlan:
    """N x k boolean membership matrix plus the parameters that produced it.

    ``per_point_count`` is p for reference plans and pair_count for target
    plans; either way it equals every row's sum.
    """

    n_points: int
    n_models: int
    per_point_count: int
    membership: np.ndarray  # (N, k) bool
    kind: str
    seed: int

    def __post_init__(self):
        membership = np.ascontiguousarray(self.membership, dtype=bool)
        if membership.shape != (self.n_points, self.n_models):
            raise ArgumentError("membership shape must be (n_points, n_models)")
        if self.kind not in (REFERENCE, TARGET):
            raise ArgumentError(f"unknown plan kind {self.kind!r}")
        membership.setflags(write=False)
        object.__setattr__(self, "membership", membership)

    def equals(self, other: "AllocationPlan") -> bool:
        return (
            self.kind == other.kind
            and self.seed == other.seed
            and self.per_point_count == other.per_point_count
            and np.array_equal(self.membership, other.membership)
        )


def allocate_reference(n: int, k: int, p: int, seed: int) -> AllocationPlan:
    """Assign each of n points to exactly p of k models, uniformly per point.

    Column sizes are n*p/k only on average; no balancing is applied.
    """
    if n < 1:
        raise ArgumentError("n must be at least 1")
    if not 1 <= p <= k:
        raise ArgumentError(f"need 1 <= p <= k, got p={p}, k={k}")
    if seed < 0:
        raise ArgumentError("seed must be non-negative")
    membership = np.zeros((n, k), dtype=bool)
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        membership[i, rng.choice(k, size=p, replace=False)] = True
    return AllocationPlan(n, k, p, membership, REFERENCE, seed)


def allocate_target_halves(n: int, pair_count: int, seed: int) -> AllocationPlan:
    """Build 2*pair_count models; each pair is a random half/half split of the points."""
    if n < 2 or n % 2:
        raise ArgumentError(f"n must be even and positive, got {n}")
    if pair_count < 1:
        raise ArgumentError("pair_count must be at least 1")
    if seed < 0:
        raise ArgumentError("seed must be non-negative")
    membership = np.zeros((n, 2 * pair_count), dtype=bool)
    half = n // 2
    for j in range(pair_count):
        rng = np.random.default_rng([seed, j])
        order = rng.permutation(n)
        membership[order[:half], 2 * j] = True
        membership[order[half:], 2 * j + 1] = True
    return AllocationPlan(n, 2 * pair_count, pair_count, membership, TARGET, seed)


def training_indices(plan: AllocationPlan, model_index: int) -> np.ndarray:
    """Ascending point positions assigned to one model."""
    if not 0 <= model_index < plan.n_models:
        raise ArgumentError(f"model_index {model_index} out of range for k={plan.n_models}")
    return np.flatnonzero(plan.membership[:, model_index])


def save_plan(plan: AllocationPlan, path) -> Path:
    """JSON header line, then the membership bitmap packed 8 cells per byte."""
    header = {
        "n": plan.n_points,
        "k": plan.n_models,
        "p": plan.per_point_count,
        "kind": plan.kind,
        "seed": plan.seed,
    }
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.packbits(plan.membership.reshape(-1), bitorder="little").tobytes())
    return path


def load_plan(path) -> AllocationPlan:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode())
        n, k = header["n"], header["k"]
        p, kind, seed = header["p"], header["kind"], header["seed"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
        raise DataFormatError(f"{path}: bad plan header: {exc}") from None
    expected = (n * k + 7) // 8
    if len(payload) != expected:
        raise DataFormatError(f"{path}: expected {expected} bitmap bytes, found {len(payload)}")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=n * k, bitorder="little")
    membership = bits.reshape(n, k).astype(bool)
    return AllocationPlan(n, k, p, membership, kind, seed)
