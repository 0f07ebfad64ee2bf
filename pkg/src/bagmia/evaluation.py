"""Validation harness: run attacks against a target model set and score them.

For every (point, target) cell the attack's 0.5-threshold verdict is
compared with the plan's ground truth, accumulating per-point TP/FN/TN/FP.
Per-target AUCs use the Mann-Whitney rank statistic with mid-rank ties.
The random-guess machinery gives the no-signal baseline: correct counts
follow Binomial(n_targets, 1/2).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .allocator import TARGET
from .dataset import LabeledDataset
from .errors import ArgumentError, DataFormatError, DegenerateLabelsError
from .farm import ModelSet
from .modelkit import predict_confidences

DEFAULT_THRESHOLDS = (65.0, 75.0, 90.0)


@dataclass(frozen=True)
class PerPointOutcome:
    """Confusion counts for one point across all target models."""

    point_id: int
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def correct(self) -> int:
        return self.tp + self.tn

    @property
    def n_targets(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * self.correct / self.n_targets


@dataclass(eq=False)
class EvaluationReport:
    """Per-point confusion counts plus every aggregate the harness reports."""

    attack_name: str
    n_points: int
    n_targets: int
    point_ids: np.ndarray
    tp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray
    fp: np.ndarray
    auc_per_target: np.ndarray
    mean_auc: float
    mean_task_accuracy: float
    thresholds: tuple
    threshold_counts: dict
    histogram: np.ndarray  # counts of correct-prediction values 0..n_targets
    metadata: dict = field(default_factory=dict)

    @property
    def correct(self) -> np.ndarray:
        return self.tp + self.tn

    @property
    def accuracy_pct(self) -> np.ndarray:
        return 100.0 * self.correct / self.n_targets

    def point_outcomes(self) -> list[PerPointOutcome]:
        return [
            PerPointOutcome(int(i), int(a), int(b), int(c), int(d))
            for i, a, b, c, d in zip(self.point_ids, self.tp, self.fn, self.tn, self.fp)
        ]

    def vulnerable_points(self, threshold: float) -> frozenset:
        """Point ids attacked correctly in at least ``threshold`` percent of targets."""
        mask = 100 * self.correct >= threshold * self.n_targets
        return frozenset(int(i) for i in self.point_ids[mask])


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with mid-rank tie handling.

    Equals the probability that a random In score outranks a random Out
    score, ties counting one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ArgumentError("scores and labels must be equal-length vectors")
    n_in = int(labels.sum())
    n_out = labels.size - n_in
    if n_in == 0 or n_out == 0:
        raise DegenerateLabelsError("AUC undefined: only one label present")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels].sum() - n_in * (n_in + 1) / 2) / (n_in * n_out))


def validate_thresholds(thresholds) -> tuple:
    thresholds = tuple(float(t) for t in thresholds)
    for t in thresholds:
        if not 50 < t <= 100:
            raise ArgumentError(f"threshold {t} outside (50, 100]")
    return thresholds


def threshold_counts(report: EvaluationReport, thresholds) -> dict:
    """Points at or above each accuracy threshold (inclusive)."""
    thresholds = validate_thresholds(thresholds)
    correct = report.correct
    return {
        t: int(np.count_nonzero(100 * correct >= t * report.n_targets)) for t in thresholds
    }


def run_attack_validation(
    scorer,
    targets: ModelSet,
    data: LabeledDataset,
    thresholds=DEFAULT_THRESHOLDS,
    metadata: dict | None = None,
) -> EvaluationReport:
    """Attack every point of every target model and aggregate the outcome.

    ``scorer`` is a callable ``(confidences (N, C), target_index) -> (N,)``
    returning membership scores in [0, 1]; verdicts use the inclusive 0.5
    rule. Confusion bookkeeping is checked exactly: per point the four
    cells sum to n_targets and TP+FN equals the plan's In count.
    """
    plan = targets.plan
    if plan.kind != TARGET:
        raise ArgumentError(f"targets must come from a target-kind plan, got {plan.kind!r}")
    if plan.n_points != data.n_points:
        raise ArgumentError(f"plan covers {plan.n_points} points but dataset has {data.n_points}")
    thresholds = validate_thresholds(thresholds)
    n, k = plan.n_points, plan.n_models
    tp = np.zeros(n, dtype=np.int64)
    fn = np.zeros(n, dtype=np.int64)
    tn = np.zeros(n, dtype=np.int64)
    fp = np.zeros(n, dtype=np.int64)
    aucs = np.empty(k)
    for t, model in enumerate(targets.models):
        confidences = predict_confidences(model, data.points)
        scores = np.asarray(scorer(confidences, t), dtype=np.float64)
        if scores.shape != (n,):
            raise ArgumentError(f"scorer returned shape {scores.shape}, expected ({n},)")
        truth = plan.membership[:, t]
        verdict = scores >= 0.5
        tp += verdict & truth
        fn += ~verdict & truth
        tn += ~verdict & ~truth
        fp += verdict & ~truth
        aucs[t] = roc_auc(scores, truth)
    if not np.all(tp + fn + tn + fp == k):
        raise RuntimeError("confusion bookkeeping violated: cells do not sum to n_targets")
    if not np.all(tp + fn == plan.per_point_count):
        raise RuntimeError("confusion bookkeeping violated: TP+FN does not match the plan's In count")
    correct = tp + tn
    report = EvaluationReport(
        attack_name=getattr(scorer, "name", scorer.__class__.__name__),
        n_points=n,
        n_targets=k,
        point_ids=data.point_ids.copy(),
        tp=tp,
        fn=fn,
        tn=tn,
        fp=fp,
        auc_per_target=aucs,
        mean_auc=float(aucs.mean()),
        mean_task_accuracy=float(targets.train_accuracies.mean()),
        thresholds=thresholds,
        threshold_counts={},
        histogram=np.bincount(correct, minlength=k + 1),
        metadata=dict(metadata or {}),
    )
    report.threshold_counts = threshold_counts(report, thresholds)
    return report


def binomial_tail(n: int, threshold_count: int) -> float:
    """Exact P(X >= threshold_count) for X ~ Binomial(n, 1/2), by integer summation."""
    if n < 0 or not 0 <= threshold_count <= n:
        raise ArgumentError(f"need 0 <= threshold_count <= n, got ({n}, {threshold_count})")
    numerator = sum(math.comb(n, j) for j in range(threshold_count, n + 1))
    return numerator / (1 << n)


@dataclass(eq=False)
class RandomGuessSummary:
    """Histogram and summary statistics of a pure coin-flip attack."""

    n_points: int
    n_targets: int
    seed: int
    histogram: np.ndarray  # counts of correct-guess values 0..n_targets
    mean: float
    std: float
    threshold_counts: dict


def random_guess_simulation(
    n_points: int, n_targets: int, seed: int, thresholds=DEFAULT_THRESHOLDS
) -> RandomGuessSummary:
    """Fair-coin verdicts for every point against balanced ground truth.

    Correct counts follow Binomial(n_targets, 1/2): mean n_targets/2,
    standard deviation sqrt(n_targets)/2.
    """
    if n_points < 1 or n_targets < 1:
        raise ArgumentError("n_points and n_targets must be at least 1")
    thresholds = validate_thresholds(thresholds)
    rng = np.random.default_rng(seed)
    verdicts = rng.random((n_points, n_targets)) < 0.5
    truth = np.zeros(n_targets, dtype=bool)
    truth[: n_targets // 2] = True
    correct = np.count_nonzero(verdicts == truth[None, :], axis=1)
    counts = {
        t: int(np.count_nonzero(100 * correct >= t * n_targets)) for t in thresholds
    }
    return RandomGuessSummary(
        n_points=n_points,
        n_targets=n_targets,
        seed=seed,
        histogram=np.bincount(correct, minlength=n_targets + 1),
        mean=float(correct.mean()),
        std=float(correct.std(ddof=1)) if n_points > 1 else 0.0,
        threshold_counts=counts,
    )


def jaccard(set_a, set_b) -> float:
    """|A intersect B| / |A union B|; two empty sets count as identical (1.0)."""
    a, b = set(set_a), set(set_b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


class OracleScorer:
    """Reads membership straight from the plan; the perfect-attack bound."""

    name = "oracle"

    def __init__(self, plan):
        self.plan = plan

    def __call__(self, confidences, target_index):
        return self.plan.membership[:, target_index].astype(np.float64)


class ConstantScorer:
    """Emits one fixed score for every point."""

    def __init__(self, value: float = 0.5):
        self.value = value
        self.name = f"constant_{value}"

    def __call__(self, confidences, target_index):
        return np.full(confidences.shape[0], self.value)


class CoinFlipScorer:
    """Uniform random scores, keyed by (seed, target) so runs reproduce."""

    def __init__(self, seed: int, name: str = "random_guess"):
        self.seed = seed
        self.name = name

    def __call__(self, confidences, target_index):
        rng = np.random.default_rng([self.seed, target_index])
        return rng.random(confidences.shape[0])


def write_report(report: EvaluationReport, directory, basename: str) -> Path:
    """Write ``<basename>.json`` plus per-point and histogram CSV sidecars.

    The JSON is canonical (sorted keys, repr floats): two identical
    evaluations serialize byte-identically.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "attack": report.attack_name,
        "metadata": report.metadata,
        "n_points": report.n_points,
        "n_targets": report.n_targets,
        "mean_auc": report.mean_auc,
        "auc_per_target": [float(a) for a in report.auc_per_target],
        "mean_task_accuracy": report.mean_task_accuracy,
        "thresholds": list(report.thresholds),
        "threshold_counts": {f"{t:g}": c for t, c in report.threshold_counts.items()},
        "histogram": [int(v) for v in report.histogram],
    }
    json_path = directory / f"{basename}.json"
    json_path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    with open(directory / f"{basename}_points.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point_id", "tp", "fn", "tn", "fp", "accuracy_pct"])
        accuracy = report.accuracy_pct
        for i in range(report.n_points):
            writer.writerow(
                [
                    int(report.point_ids[i]),
                    int(report.tp[i]),
                    int(report.fn[i]),
                    int(report.tn[i]),
                    int(report.fp[i]),
                    repr(float(accuracy[i])),
                ]
            )
    with open(directory / f"{basename}_histogram.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["correct_count", "n_points"])
        for value, count in enumerate(report.histogram):
            writer.writerow([value, int(count)])
    return json_path


def load_report(json_path) -> EvaluationReport:
    """Rebuild a report from its JSON document and per-point CSV sidecar."""
    json_path = Path(json_path)
    try:
        doc = json.loads(json_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{json_path}: bad report JSON: {exc}") from None
    points_path = json_path.with_name(json_path.stem + "_points.csv")
    ids, tp, fn, tn, fp = [], [], [], [], []
    with open(points_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:5] != ["point_id", "tp", "fn", "tn", "fp"]:
            raise DataFormatError(f"{points_path}: unexpected per-point header {header!r}")
        for row in reader:
            ids.append(int(row[0]))
            tp.append(int(row[1]))
            fn.append(int(row[2]))
            tn.append(int(row[3]))
            fp.append(int(row[4]))
    thresholds = tuple(float(t) for t in doc["thresholds"])
    return EvaluationReport(
        attack_name=doc["attack"],
        n_points=doc["n_points"],
        n_targets=doc["n_targets"],
        point_ids=np.asarray(ids, dtype=np.int64),
        tp=np.asarray(tp, dtype=np.int64),
        fn=np.asarray(fn, dtype=np.int64),
        tn=np.asarray(tn, dtype=np.int64),
        fp=np.asarray(fp, dtype=np.int64),
        auc_per_target=np.asarray(doc["auc_per_target"], dtype=np.float64),
        mean_auc=doc["mean_auc"],
        mean_task_accuracy=doc["mean_task_accuracy"],
        thresholds=thresholds,
        threshold_counts={t: doc["threshold_counts"][f"{t:g}"] for t in thresholds},
        histogram=np.asarray(doc["histogram"], dtype=np.int64),
        metadata=doc.get("metadata", {}),
    )
