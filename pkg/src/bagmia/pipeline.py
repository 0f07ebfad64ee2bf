"""Configuration-driven orchestration of the full auditing pipeline.

Stages: allocate -> train-refs -> train-targets -> extract -> attack ->
baseline -> evaluate -> compare. Every stage reads its inputs from disk
artifacts and records what it wrote in ``manifest.json`` keyed by an input
hash, so re-running with an unchanged config is a no-op and interrupted
runs resume where they stopped. All randomness derives from the master
seed, so two fresh runs of the same config produce byte-identical plans,
models, tensors, and reports.

Layout under the output directory::

    config.json   resolved configuration copy
    plans/        allocation plans
    models/       one subdirectory per model set
    tensors/      confidence tensors
    attacks/      attack-model JSONL files
    reports/      evaluation reports, CSV sidecars, figures
    manifest.json
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .allocator import AllocationPlan, allocate_reference, allocate_target_halves, load_plan, save_plan
from .attacks import (
    ClassAttackScorer,
    LogRegConfig,
    PointAttackScorer,
    load_class_attacks,
    load_point_attacks,
    save_class_attacks,
    save_point_attacks,
    train_class_attacks,
    train_point_attacks,
)
from .dataset import LabeledDataset, load_csv, synth_gaussian_mixture
from .errors import ArgumentError, ConfigValidationError
from .evaluation import (
    CoinFlipScorer,
    EvaluationReport,
    load_report,
    run_attack_validation,
    validate_thresholds,
    write_report,
)
from .farm import ModelSet, extract_confidence_tensor, load_tensor, save_tensor, train_model_set
from .figures import save_histogram_figure, save_threshold_figure
from .modelkit import ModelSpec, load_classifier, save_classifier
from .seeding import derive_seed

RANDOM_BASELINE_NAME = "random_guess"
CLASS_BASELINE_NAME = "class_baseline"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSource:
    class_count: int
    per_class: int
    dim: int
    separation: float


@dataclass(frozen=True)
class CsvSource:
    path: str
    label_column: int
    skip_header: bool = False


@dataclass(frozen=True)
class ReferenceConfig:
    name: str
    k: int
    p: int
    model: ModelSpec


@dataclass(frozen=True)
class TargetConfig:
    pair_count: int
    model: ModelSpec


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one pipeline run needs, resolved to concrete seeds."""

    seed: int
    dataset: SyntheticSource | CsvSource
    reference_configs: tuple[ReferenceConfig, ...]
    target: TargetConfig
    attack: LogRegConfig
    thresholds: tuple = (65.0, 75.0, 90.0)
    baseline_reference: str = ""
    output_dir: str | None = None

    def reference(self, name: str) -> ReferenceConfig:
        for rc in self.reference_configs:
            if rc.name == name:
                return rc
        raise ArgumentError(f"no reference configuration named {name!r}")


def _parse_model_spec(raw: dict, default_seed: int, violations: list, where: str) -> ModelSpec:
    try:
        return ModelSpec(**{"seed": default_seed, **raw})
    except (ArgumentError, TypeError) as exc:
        violations.append(f"{where}: bad model spec: {exc}")
        return ModelSpec(seed=default_seed)


def parse_config(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON document.

    Validation is exhaustive: every violation found is collected and
    reported in a single ConfigValidationError.
    """
    violations: list[str] = []
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        violations.append(f"seed must be a non-negative integer, got {seed!r}")
        seed = 0

    raw_dataset = doc.get("dataset", {})
    sources = [k for k in ("synthetic", "csv") if k in raw_dataset]
    dataset: SyntheticSource | CsvSource = SyntheticSource(2, 1, 1, 0.0)
    if len(sources) != 1:
        violations.append("dataset must specify exactly one of 'synthetic' or 'csv'")
    elif sources[0] == "synthetic":
        try:
            dataset = SyntheticSource(**raw_dataset["synthetic"])
        except TypeError as exc:
            violations.append(f"dataset.synthetic: {exc}")
    else:
        try:
            dataset = CsvSource(**raw_dataset["csv"])
        except TypeError as exc:
            violations.append(f"dataset.csv: {exc}")

    refs: list[ReferenceConfig] = []
    raw_refs = doc.get("reference_configs", [])
    if not raw_refs:
        violations.append("reference_configs must list at least one configuration")
    names = [r.get("name", f"#{i}") for i, r in enumerate(raw_refs)]
    if len(set(names)) != len(names):
        violations.append(f"reference configuration names must be unique, got {names}")
    for raw in raw_refs:
        name = raw.get("name")
        if not name:
            violations.append("every reference configuration needs a name")
            name = f"#{len(refs)}"
        k, p = raw.get("k", 0), raw.get("p", 0)
        if not 1 <= p <= k - 1:
            violations.append(f"reference {name!r}: need 1 <= p <= k-1, got k={k}, p={p}")
        spec = _parse_model_spec(
            raw.get("model", {}), derive_seed(seed, "model", "ref", name), violations, f"reference {name!r}"
        )
        refs.append(ReferenceConfig(name, k, p, spec))

    raw_target = doc.get("target_config", {})
    pair_count = raw_target.get("pair_count", 0)
    if pair_count < 1:
        violations.append(f"target_config.pair_count must be at least 1, got {pair_count}")
    target_spec = _parse_model_spec(
        raw_target.get("model", {}), derive_seed(seed, "model", "target"), violations, "target_config"
    )

    try:
        attack = LogRegConfig(**doc.get("attack", {}))
    except (ArgumentError, TypeError) as exc:
        violations.append(f"attack: {exc}")
        attack = LogRegConfig()

    try:
        thresholds = validate_thresholds(doc.get("thresholds", (65, 75, 90)))
    except (ArgumentError, TypeError, ValueError) as exc:
        violations.append(f"thresholds: {exc}")
        thresholds = (65.0, 75.0, 90.0)

    baseline_reference = doc.get("baseline_reference") or (refs[0].name if refs else "")
    if refs and baseline_reference not in [r.name for r in refs]:
        violations.append(f"baseline_reference {baseline_reference!r} names no reference configuration")

    if violations:
        raise ConfigValidationError(violations)
    return ExperimentConfig(
        seed=seed,
        dataset=dataset,
        reference_configs=tuple(refs),
        target=TargetConfig(pair_count, target_spec),
        attack=attack,
        thresholds=thresholds,
        baseline_reference=baseline_reference,
        output_dir=doc.get("output_dir"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigValidationError([f"{path}: not valid JSON: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ConfigValidationError([f"{path}: top level must be a JSON object"])
    return parse_config(doc)


def config_to_doc(config: ExperimentConfig) -> dict:
    source_key = "synthetic" if isinstance(config.dataset, SyntheticSource) else "csv"
    return {
        "seed": config.seed,
        "dataset": {source_key: asdict(config.dataset)},
        "reference_configs": [
            {"name": rc.name, "k": rc.k, "p": rc.p, "model": asdict(rc.model)}
            for rc in config.reference_configs
        ],
        "target_config": {"pair_count": config.target.pair_count, "model": asdict(config.target.model)},
        "attack": asdict(config.attack),
        "thresholds": list(config.thresholds),
        "baseline_reference": config.baseline_reference,
        "output_dir": config.output_dir,
    }


# ---------------------------------------------------------------------------
# manifest and hashing
# ---------------------------------------------------------------------------


def stable_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Manifest:
    """Tracks which artifacts exist and the input hash that produced them."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / "manifest.json"
        self.entries: dict = {}
        if self.path.exists():
            self.entries = json.loads(self.path.read_text(encoding="utf-8")).get("artifacts", {})

    def fresh(self, relpaths, input_hash: str) -> bool:
        """True if every artifact exists and was produced from these inputs."""
        for rel in relpaths:
            entry = self.entries.get(rel)
            if entry is None or entry["input_hash"] != input_hash:
                return False
            if not (self.out_dir / rel).exists():
                return False
        return True

    def record(self, relpath: str, input_hash: str):
        self.entries[relpath] = {
            "input_hash": input_hash,
            "sha256": file_sha256(self.out_dir / relpath),
        }
        self.save()

    def artifact_hash(self, relpath: str) -> str:
        return self.entries[relpath]["sha256"]

    def save(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        doc = {"artifacts": {k: self.entries[k] for k in sorted(self.entries)}}
        self.path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# model-set persistence (directory of single-model files plus stats)
# ---------------------------------------------------------------------------


def model_file_name(index: int) -> str:
    return f"model_{index:04d}.bin"


def save_model_set(models: ModelSet, directory: Path) -> list[str]:
    """Write one binary file per model plus accuracies.csv; returns relpath parts.

    Wall-clock timings go to timings.csv, which is informational and never
    hashed (it varies run to run).
    """
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for j, model in enumerate(models.models):
        save_classifier(model, directory / model_file_name(j))
        written.append(model_file_name(j))
    with open(directory / "accuracies.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "train_accuracy"])
        for j, acc in enumerate(models.train_accuracies):
            writer.writerow([j, repr(float(acc))])
    written.append("accuracies.csv")
    with open(directory / "timings.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "train_seconds"])
        for j, sec in enumerate(models.train_seconds):
            writer.writerow([j, f"{sec:.6f}"])
    return written


def load_model_set(directory: Path, plan: AllocationPlan) -> ModelSet:
    models = [load_classifier(directory / model_file_name(j)) for j in range(plan.n_models)]
    accuracies = np.zeros(plan.n_models)
    with open(directory / "accuracies.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            accuracies[int(row[0])] = float(row[1])
    return ModelSet(plan, models, accuracies, np.zeros(plan.n_models))


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------


@dataclass
class Pipeline:
    """One experiment bound to an output directory."""

    config: ExperimentConfig
    out_dir: Path
    parallelism: int = 1
    manifest: Manifest = field(init=False)
    _dataset: LabeledDataset | None = field(default=None, init=False)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = Manifest(self.out_dir)
        config_path = self.out_dir / "config.json"
        config_path.write_text(
            json.dumps(config_to_doc(self.config), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    # -- dataset ------------------------------------------------------------

    @property
    def dataset(self) -> LabeledDataset:
        if self._dataset is None:
            src = self.config.dataset
            if isinstance(src, SyntheticSource):
                self._dataset = synth_gaussian_mixture(
                    src.class_count,
                    src.per_class,
                    src.dim,
                    src.separation,
                    derive_seed(self.config.seed, "dataset"),
                )
            else:
                self._dataset = load_csv(src.path, src.label_column, src.skip_header)
        return self._dataset

    def dataset_fingerprint(self) -> str:
        src = self.config.dataset
        if isinstance(src, SyntheticSource):
            return stable_hash({"synthetic": asdict(src), "seed": derive_seed(self.config.seed, "dataset")})
        return file_sha256(src.path)

    # -- stage: allocate ------------------------------------------------------

    def ref_plan_rel(self, name: str) -> str:
        return f"plans/ref_{name}.plan"

    def target_plan_rel(self) -> str:
        return "plans/target.plan"

    def allocate(self):
        (self.out_dir / "plans").mkdir(exist_ok=True)
        n = self.dataset.n_points
        fp = self.dataset_fingerprint()
        for rc in self.config.reference_configs:
            rel = self.ref_plan_rel(rc.name)
            plan_seed = derive_seed(self.config.seed, "plan", "ref", rc.name)
            input_hash = stable_hash({"ds": fp, "n": n, "k": rc.k, "p": rc.p, "seed": plan_seed})
            if not self.manifest.fresh([rel], input_hash):
                save_plan(allocate_reference(n, rc.k, rc.p, plan_seed), self.out_dir / rel)
                self.manifest.record(rel, input_hash)
        rel = self.target_plan_rel()
        plan_seed = derive_seed(self.config.seed, "plan", "target")
        input_hash = stable_hash(
            {"ds": fp, "n": n, "pair_count": self.config.target.pair_count, "seed": plan_seed}
        )
        if not self.manifest.fresh([rel], input_hash):
            save_plan(
                allocate_target_halves(n, self.config.target.pair_count, plan_seed), self.out_dir / rel
            )
            self.manifest.record(rel, input_hash)

    # -- stages: model training ----------------------------------------------

    def _train_set(self, plan_rel: str, set_name: str, spec: ModelSpec):
        plan = load_plan(self.out_dir / plan_rel)
        input_hash = stable_hash(
            {
                "plan": self.manifest.artifact_hash(plan_rel),
                "ds": self.dataset_fingerprint(),
                "spec": asdict(spec),
            }
        )
        rels = [f"models/{set_name}/{model_file_name(j)}" for j in range(plan.n_models)]
        rels.append(f"models/{set_name}/accuracies.csv")
        if self.manifest.fresh(rels, input_hash):
            return
        models = train_model_set(plan, spec, self.dataset, self.parallelism)
        written = save_model_set(models, self.out_dir / f"models/{set_name}")
        for name in written:
            self.manifest.record(f"models/{set_name}/{name}", input_hash)

    def train_refs(self):
        for rc in self.config.reference_configs:
            self._train_set(self.ref_plan_rel(rc.name), f"ref_{rc.name}", rc.model)

    def train_targets(self):
        self._train_set(self.target_plan_rel(), "target", self.config.target.model)

    def _load_set(self, plan_rel: str, set_name: str) -> ModelSet:
        plan = load_plan(self.out_dir / plan_rel)
        return load_model_set(self.out_dir / f"models/{set_name}", plan)

    # -- stage: extract confidence tensors ------------------------------------

    def tensor_rel(self, name: str) -> str:
        return f"tensors/{name}.tensor"

    def _models_hash(self, set_name: str, n_models: int) -> str:
        return stable_hash(
            [self.manifest.artifact_hash(f"models/{set_name}/{model_file_name(j)}") for j in range(n_models)]
        )

    def extract(self):
        (self.out_dir / "tensors").mkdir(exist_ok=True)
        for rc in self.config.reference_configs:
            rel = self.tensor_rel(rc.name)
            input_hash = stable_hash(
                {
                    "models": self._models_hash(f"ref_{rc.name}", rc.k),
                    "ds": self.dataset_fingerprint(),
                }
            )
            if not self.manifest.fresh([rel], input_hash):
                models = self._load_set(self.ref_plan_rel(rc.name), f"ref_{rc.name}")
                save_tensor(extract_confidence_tensor(models, self.dataset), self.out_dir / rel)
                self.manifest.record(rel, input_hash)

    # -- stages: attack-model training -----------------------------------------

    def point_attack_rel(self, name: str) -> str:
        return f"attacks/point_{name}.jsonl"

    def class_attack_rel(self) -> str:
        return f"attacks/class_{self.config.baseline_reference}.jsonl"

    def attack(self):
        (self.out_dir / "attacks").mkdir(exist_ok=True)
        for rc in self.config.reference_configs:
            rel = self.point_attack_rel(rc.name)
            input_hash = stable_hash(
                {
                    "tensor": self.manifest.artifact_hash(self.tensor_rel(rc.name)),
                    "attack": asdict(self.config.attack),
                }
            )
            if not self.manifest.fresh([rel], input_hash):
                tensor = load_tensor(self.out_dir / self.tensor_rel(rc.name))
                models = train_point_attacks(tensor, self.config.attack)
                save_point_attacks(models, self.config.attack, self.out_dir / rel)
                self.manifest.record(rel, input_hash)

    def baseline(self):
        """Class-based attack trained on the designated reference tensor."""
        (self.out_dir / "attacks").mkdir(exist_ok=True)
        rel = self.class_attack_rel()
        tensor_rel = self.tensor_rel(self.config.baseline_reference)
        input_hash = stable_hash(
            {
                "tensor": self.manifest.artifact_hash(tensor_rel),
                "ds": self.dataset_fingerprint(),
                "attack": asdict(self.config.attack),
            }
        )
        if not self.manifest.fresh([rel], input_hash):
            tensor = load_tensor(self.out_dir / tensor_rel)
            models = train_class_attacks(tensor, self.dataset, self.config.attack)
            save_class_attacks(models, self.config.attack, self.out_dir / rel)
            self.manifest.record(rel, input_hash)

    # -- stage: evaluate ---------------------------------------------------------

    def report_names(self) -> list[str]:
        names = [f"gmia_{rc.name}" for rc in self.config.reference_configs]
        names.append(CLASS_BASELINE_NAME)
        names.append(RANDOM_BASELINE_NAME)
        return names

    def _evaluate_one(self, scorer, name: str, attack_hash: str, targets: ModelSet, metadata: dict):
        rels = [f"reports/{name}.json", f"reports/{name}_points.csv", f"reports/{name}_histogram.csv"]
        input_hash = stable_hash(
            {
                "attack": attack_hash,
                "targets": self._models_hash("target", targets.plan.n_models),
                "ds": self.dataset_fingerprint(),
                "thresholds": list(self.config.thresholds),
            }
        )
        if self.manifest.fresh(rels, input_hash):
            return
        report = run_attack_validation(scorer, targets, self.dataset, self.config.thresholds, metadata)
        write_report(report, self.out_dir / "reports", name)
        save_histogram_figure(report, self.out_dir / f"reports/{name}_histogram.png")
        for rel in rels:
            self.manifest.record(rel, input_hash)

    def evaluate(self):
        (self.out_dir / "reports").mkdir(exist_ok=True)
        targets = self._load_set(self.target_plan_rel(), "target")
        for rc in self.config.reference_configs:
            rel = self.point_attack_rel(rc.name)
            models, _ = load_point_attacks(self.out_dir / rel)
            scorer = PointAttackScorer(models, name=f"gmia_{rc.name}")
            self._evaluate_one(
                scorer,
                f"gmia_{rc.name}",
                self.manifest.artifact_hash(rel),
                targets,
                {"kind": "point", "reference_config": rc.name, "k": rc.k, "p": rc.p},
            )
        rel = self.class_attack_rel()
        class_models, _ = load_class_attacks(self.out_dir / rel)
        scorer = ClassAttackScorer(class_models, self.dataset.labels, name=CLASS_BASELINE_NAME)
        self._evaluate_one(
            scorer,
            CLASS_BASELINE_NAME,
            self.manifest.artifact_hash(rel),
            targets,
            {"kind": "class", "reference_config": self.config.baseline_reference},
        )
        random_seed = derive_seed(self.config.seed, "random-baseline")
        self._evaluate_one(
            CoinFlipScorer(random_seed),
            RANDOM_BASELINE_NAME,
            stable_hash({"random_seed": random_seed}),
            targets,
            {"kind": "random"},
        )

    # -- stage: compare ------------------------------------------------------------

    def compare(self):
        reports = [load_report(self.out_dir / f"reports/{name}.json") for name in self.report_names()]
        doc = compare_attacks(reports, self.config.thresholds)
        rel = "reports/comparison.json"
        (self.out_dir / rel).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        input_hash = stable_hash(
            {"reports": [self.manifest.artifact_hash(f"reports/{n}.json") for n in self.report_names()]}
        )
        self.manifest.record(rel, input_hash)
        with open(self.out_dir / "reports/comparison.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "attack_a", "attack_b", "size_a", "size_b", "intersection", "jaccard"])
            for row in doc["pairwise"]:
                writer.writerow(
                    [
                        f"{row['threshold']:g}",
                        row["a"],
                        row["b"],
                        row["size_a"],
                        row["size_b"],
                        row["intersection"],
                        repr(row["jaccard"]),
                    ]
                )
        save_threshold_figure(reports, self.out_dir / "reports/threshold_counts.png")

    def run(self):
        self.allocate()
        self.train_refs()
        self.train_targets()
        self.extract()
        self.attack()
        self.baseline()
        self.evaluate()
        self.compare()
        return self.out_dir


def compare_attacks(reports: list[EvaluationReport], thresholds) -> dict:
    """Pairwise vulnerable-set overlap per threshold, plus the all-attacks intersection."""
    thresholds = validate_thresholds(thresholds)
    if len(reports) < 1:
        raise ArgumentError("need at least one report to compare")
    n = reports[0].n_points
    n_targets = reports[0].n_targets
    for r in reports[1:]:
        if r.n_points != n or r.n_targets != n_targets:
            raise ArgumentError(
                f"reports disagree on shape: {r.attack_name} has ({r.n_points}, {r.n_targets}), "
                f"expected ({n}, {n_targets})"
            )
    names = [r.attack_name for r in reports]
    sets = {t: [r.vulnerable_points(t) for r in reports] for t in thresholds}
    pairwise = []
    for t in thresholds:
        for i, j in combinations(range(len(reports)), 2):
            a, b = sets[t][i], sets[t][j]
            union = len(a | b)
            pairwise.append(
                {
                    "threshold": t,
                    "a": names[i],
                    "b": names[j],
                    "size_a": len(a),
                    "size_b": len(b),
                    "intersection": len(a & b),
                    "jaccard": (len(a & b) / union) if union else 1.0,
                }
            )
    intersection_all = {}
    for t in thresholds:
        common = set(sets[t][0])
        for s in sets[t][1:]:
            common &= s
        intersection_all[f"{t:g}"] = len(common)
    return {
        "attacks": names,
        "n_points": n,
        "n_targets": n_targets,
        "thresholds": list(thresholds),
        "set_sizes": {f"{t:g}": [len(s) for s in sets[t]] for t in thresholds},
        "pairwise": pairwise,
        "intersection_all": intersection_all,
    }


def run_pipeline(config: ExperimentConfig, out_dir, parallelism: int = 1) -> Path:
    """Run every stage; returns the artifact directory."""
    return Pipeline(config, Path(out_dir), parallelism).run()
