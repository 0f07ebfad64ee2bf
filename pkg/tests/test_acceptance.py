"""Acceptance suite: one test per shipping criterion, pinned tolerances.

Each test prints a single ``criterion N PASS`` line with the measured
numbers; `pytest -v` therefore reads as the full acceptance checklist.
The end-to-end criterion (7) trains 5 x 120 small networks and dominates
the runtime at roughly a minute; everything else finishes in seconds.
"""

import json
import math
from statistics import stdev

import numpy as np
import pytest
from scipy.optimize import minimize

from bagmia.allocator import allocate_reference, allocate_target_halves
from bagmia.attacks import LogRegConfig, attack_decision, fit_weighted_logreg
from bagmia.dataset import synth_gaussian_mixture
from bagmia.evaluation import (
    ConstantScorer,
    OracleScorer,
    binomial_tail,
    jaccard,
    random_guess_simulation,
    roc_auc,
    run_attack_validation,
)
from bagmia.farm import train_model_set
from bagmia.modelkit import ModelSpec, loss_and_grads, train_classifier
from bagmia.pipeline import parse_config, run_pipeline


def test_criterion_01_allocation_invariants():
    col_sizes = []
    for seed in range(20):
        plan = allocate_reference(1000, 100, 10, seed=seed)
        assert np.all(plan.membership.sum(axis=1) == 10), f"seed {seed}: row sum not exactly 10"
        col_sizes.append(plan.membership.sum(axis=0))
    mean_col = float(np.concatenate(col_sizes).mean())
    assert 97.0 <= mean_col <= 103.0, f"mean column size {mean_col} outside 100 +- 3"

    for seed in range(5):
        plan = allocate_target_halves(1000, 50, seed=seed)
        assert np.all(plan.membership.sum(axis=1) == 50), f"seed {seed}: row sum not exactly 50"
        for j in range(50):
            left, right = plan.membership[:, 2 * j], plan.membership[:, 2 * j + 1]
            assert np.all(left ^ right), f"seed {seed}: pair {j} does not partition the points"
            assert left.sum() == 500
    print(f"criterion 1 PASS: 20 reference plans row-exact, mean column size {mean_col:.3f}; "
          "5 target plans partition-exact")


def test_criterion_02_random_guess_baseline():
    sim = random_guess_simulation(50000, 100, seed=0, thresholds=(65, 75, 90))
    at_or_above_75 = int(sim.histogram[75:].sum())
    assert 49.9 <= sim.mean <= 50.1, f"mean {sim.mean}"
    assert 4.9 <= sim.std <= 5.1, f"std {sim.std}"
    assert at_or_above_75 == 0, f"{at_or_above_75} points reached 75%"
    assert sim.threshold_counts[75.0] == 0
    expected_tail = binomial_tail(100, 75) * 50000
    assert expected_tail < 0.05, f"expected count {expected_tail}"
    print(f"criterion 2 PASS: mean {sim.mean:.3f}, std {sim.std:.3f}, none at 75% "
          f"(expected count {expected_tail:.4f})")


def test_criterion_03_auc_matches_pair_enumeration():
    def brute_force(scores, labels):
        ins = scores[labels]
        outs = scores[~labels]
        total = 0.0
        for a in ins:
            for b in outs:
                total += 1.0 if a > b else (0.5 if a == b else 0.0)
        return total / (len(ins) * len(outs))

    rng = np.random.default_rng(2024)
    checked = 0
    for trial in range(200):
        n = int(rng.integers(2, 21))
        if trial % 2:
            scores = rng.choice(np.linspace(0, 1, 5), size=n)  # heavy ties
        else:
            scores = np.round(rng.random(n), 2)  # occasional ties
            scores[0] = scores[-1]  # force at least one tie
        labels = np.zeros(n, dtype=bool)
        labels[: rng.integers(1, n)] = True
        rng.shuffle(labels)
        assert roc_auc(scores, labels) == brute_force(scores, labels), f"trial {trial} diverged"
        checked += 1
    print(f"criterion 3 PASS: {checked} instances, rank AUC == pair enumeration exactly")


def test_criterion_04_jaccard_reproduction():
    size_a, size_b, inter = 9974, 9521, 7565
    a = frozenset(range(size_a))
    b = frozenset(range(size_a - inter, size_a - inter + size_b))
    assert len(a & b) == inter and len(a) == size_a and len(b) == size_b
    value = jaccard(a, b)
    assert abs(value - 0.634) <= 0.001, f"jaccard {value}"
    print(f"criterion 4 PASS: jaccard for sizes 9974/9521 overlapping 7565 = {value:.6f}, "
          "within 0.634 +- 0.001")


def test_criterion_05_logreg_matches_reference_optimizer():
    config = LogRegConfig(l2_penalty=1e-2, learning_rate=0.3, iterations=30000)

    def reference(x, y):
        sw = np.where(y == 1, 0.5 / y.sum(), 0.5 / (len(y) - y.sum()))

        def objective(theta):
            z = x @ theta[:-1] + theta[-1]
            return float((sw * (np.logaddexp(0.0, z) - y * z)).sum()
                         + config.l2_penalty * (theta[:-1] @ theta[:-1]))

        return minimize(objective, np.zeros(x.shape[1] + 1), method="L-BFGS-B",
                        options={"maxiter": 20000, "ftol": 1e-18, "gtol": 1e-14}).x

    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(30):
        x = rng.normal(size=(20, 4))
        y = np.zeros(20)
        y[: rng.integers(2, 18)] = 1.0
        rng.shuffle(y)
        gap = float(np.max(np.abs(fit_weighted_logreg(x, y, config) - reference(x, y))))
        worst = max(worst, gap)
    assert worst < 1e-4, f"worst coordinate gap {worst}"

    x = np.full((100, 3), 0.7)
    y = np.concatenate([np.ones(90), np.zeros(10)])
    score, _ = attack_decision(fit_weighted_logreg(x, y, LogRegConfig()), x[0])
    assert abs(score - 0.5) < 1e-3, f"constant-feature probability {score}"
    print(f"criterion 5 PASS: 30 instances, worst gap {worst:.2e}; "
          f"constant-feature 90/10 probability {score:.6f}")


@pytest.mark.parametrize("arch", ["softmax", "mlp"])
def test_criterion_06_gradient_checks(arch):
    rng = np.random.default_rng(99)
    x = rng.normal(size=(5, 3))
    labels = np.array([0, 2, 1, 2, 0])
    from bagmia.modelkit import _init_weights

    spec = ModelSpec(architecture=arch, hidden_width=4, seed=99)
    weights = [w + 0.05 * rng.normal(size=w.shape) for w in _init_weights(spec, 3, 3, rng)]
    _, analytic = loss_and_grads(weights, arch, x, labels, 0.01)
    eps = 1e-6
    worst = 0.0
    for i, w in enumerate(weights):
        it = np.nditer(w, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            plus = [v.copy() for v in weights]
            minus = [v.copy() for v in weights]
            plus[i][idx] += eps
            minus[i][idx] -= eps
            lp, _ = loss_and_grads(plus, arch, x, labels, 0.01)
            lm, _ = loss_and_grads(minus, arch, x, labels, 0.01)
            numeric = (lp - lm) / (2 * eps)
            rel = abs(analytic[i][idx] - numeric) / max(abs(numeric), 1e-8)
            worst = max(worst, rel)
            it.iternext()
    assert worst < 1e-4, f"{arch}: worst relative error {worst}"
    print(f"criterion 6 PASS ({arch}): worst gradient relative error {worst:.2e}")


def _desk_scale_config(seed):
    return parse_config({
        "seed": seed,
        "dataset": {"synthetic": {"class_count": 4, "per_class": 200, "dim": 8,
                                   "separation": 1.0}},
        "reference_configs": [
            {"name": "bag", "k": 60, "p": 12,
             "model": {"architecture": "mlp", "hidden_width": 32, "epochs": 100,
                        "learning_rate": 3e-3}}
        ],
        "target_config": {"pair_count": 30,
                          "model": {"architecture": "mlp", "hidden_width": 32, "epochs": 200,
                                     "learning_rate": 3e-3}},
        "attack": {"iterations": 2000},
        "thresholds": [65, 75, 90],
    })


def test_criterion_07_end_to_end_beats_class_baseline(tmp_path):
    seeds = (101, 202, 303, 404, 505)
    auc_wins = count_wins = 0
    lines = []
    for seed in seeds:
        out = run_pipeline(_desk_scale_config(seed), tmp_path / f"seed_{seed}", parallelism=4)
        gmia = json.loads((out / "reports/gmia_bag.json").read_text())
        base = json.loads((out / "reports/class_baseline.json").read_text())
        floor = 0.5 + 3 * stdev(gmia["auc_per_target"]) / math.sqrt(gmia["n_targets"])
        assert gmia["mean_auc"] > floor, (
            f"seed {seed}: GMIA mean AUC {gmia['mean_auc']:.4f} below noise floor {floor:.4f}"
        )
        auc_wins += gmia["mean_auc"] >= base["mean_auc"]
        count_wins += gmia["threshold_counts"]["65"] >= base["threshold_counts"]["65"]
        lines.append(f"seed {seed}: auc {gmia['mean_auc']:.4f} vs {base['mean_auc']:.4f}, "
                     f">=65% {gmia['threshold_counts']['65']} vs {base['threshold_counts']['65']}")
    assert auc_wins >= 4, f"GMIA mean AUC won only {auc_wins}/5 seeds"
    assert count_wins >= 4, f"GMIA >=65% count won only {count_wins}/5 seeds"
    print(f"criterion 7 PASS: auc wins {auc_wins}/5, count wins {count_wins}/5; " + "; ".join(lines))


def test_criterion_08_perfect_and_degenerate_bounds():
    data = synth_gaussian_mixture(3, 30, 4, 2.0, seed=808)
    plan = allocate_target_halves(data.n_points, 4, seed=809)
    targets = train_model_set(plan, ModelSpec(epochs=3, seed=810), data)

    oracle = run_attack_validation(OracleScorer(plan), targets, data)
    assert oracle.mean_auc == 1.0
    assert np.all(oracle.auc_per_target == 1.0)
    assert np.all(oracle.correct == oracle.n_targets), "oracle not 100% correct everywhere"

    constant = run_attack_validation(ConstantScorer(0.5), targets, data)
    assert np.all(constant.auc_per_target == 0.5)
    assert constant.mean_auc == 0.5
    print("criterion 8 PASS: oracle AUC exactly 1.0 at 100% accuracy; constant AUC exactly 0.5")


def test_criterion_09_determinism(tmp_path):
    doc = {
        "seed": 909,
        "dataset": {"synthetic": {"class_count": 3, "per_class": 40, "dim": 5, "separation": 1.5}},
        "reference_configs": [
            {"name": "A", "k": 10, "p": 3, "model": {"architecture": "softmax", "epochs": 5}}
        ],
        "target_config": {"pair_count": 4, "model": {"architecture": "softmax", "epochs": 5}},
        "attack": {"iterations": 100},
        "thresholds": [65, 75, 90],
    }
    config = parse_config(doc)
    first = run_pipeline(config, tmp_path / "first", parallelism=1)
    second = run_pipeline(config, tmp_path / "second", parallelism=1)
    eight = run_pipeline(config, tmp_path / "eight", parallelism=8)

    reports = sorted(p.relative_to(first) for p in (first / "reports").glob("*.json"))
    assert reports, "no reports produced"
    for rel in reports:
        assert (first / rel).read_bytes() == (second / rel).read_bytes(), f"{rel} differs across runs"

    artifacts = sorted(
        p.relative_to(first)
        for pattern in ("models/**/model_*.bin", "tensors/*.tensor")
        for p in first.glob(pattern)
    )
    assert artifacts, "no model or tensor artifacts produced"
    for rel in artifacts:
        assert (first / rel).read_bytes() == (eight / rel).read_bytes(), f"{rel} differs at parallelism 8"
    print(f"criterion 9 PASS: {len(reports)} reports byte-identical across runs; "
          f"{len(artifacts)} model/tensor artifacts byte-identical at parallelism 1 vs 8")


def test_criterion_10_confusion_bookkeeping():
    data = synth_gaussian_mixture(4, 25, 5, 1.5, seed=1010)
    plan = allocate_target_halves(data.n_points, 6, seed=1011)
    targets = train_model_set(plan, ModelSpec(epochs=3, seed=1012), data)
    from bagmia.evaluation import CoinFlipScorer

    report = run_attack_validation(CoinFlipScorer(1013), targets, data)
    cells = report.tp + report.fn + report.tn + report.fp
    assert np.all(cells == report.n_targets), "TP+FN+TN+FP != n_targets for some point"
    assert np.all(report.tp + report.fn == plan.per_point_count), "TP+FN != pair_count for some point"
    print(f"criterion 10 PASS: identities hold for all {report.n_points} points "
          f"across {report.n_targets} targets")
