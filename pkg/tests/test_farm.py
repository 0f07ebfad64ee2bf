import numpy as np
import pytest

from bagmia.allocator import allocate_reference, allocate_target_halves, training_indices
from bagmia.dataset import subset, synth_gaussian_mixture
from bagmia.errors import ArgumentError, DataFormatError
from bagmia.farm import (
    extract_confidence_tensor,
    load_tensor,
    per_model_seed,
    save_tensor,
    train_model_set,
)
from bagmia.modelkit import ModelSpec, predict_confidences


DATA = synth_gaussian_mixture(3, 40, 4, 2.0, seed=21)
PLAN = allocate_reference(120, 6, 2, seed=22)
SPEC = ModelSpec(epochs=3, seed=23)


def test_models_train_on_their_split_only():
    models = train_model_set(PLAN, SPEC, DATA)
    assert len(models.models) == 6
    assert models.train_accuracies.shape == (6,)
    # retraining model 2 by hand reproduces it exactly
    idx = training_indices(PLAN, 2)
    from bagmia.modelkit import train_classifier
    from dataclasses import replace

    by_hand = train_classifier(replace(SPEC, seed=per_model_seed(SPEC.seed, 2)), subset(DATA, idx))
    assert models.models[2].weights_equal(by_hand)


def test_parallel_matches_serial():
    serial = train_model_set(PLAN, SPEC, DATA, parallelism=1)
    parallel = train_model_set(PLAN, SPEC, DATA, parallelism=4)
    for a, b in zip(serial.models, parallel.models):
        assert a.weights_equal(b)
    assert np.array_equal(serial.train_accuracies, parallel.train_accuracies)


def test_model_seeds_differ_across_set():
    models = train_model_set(PLAN, SPEC, DATA)
    seeds = {m.spec.seed for m in models.models}
    assert len(seeds) == 6


def test_empty_split_is_an_error():
    from bagmia.allocator import REFERENCE, AllocationPlan

    membership = np.zeros((6, 3), dtype=bool)
    membership[:, 0] = True  # columns 1 and 2 get nothing
    plan = AllocationPlan(6, 3, 1, membership, REFERENCE, 0)
    with pytest.raises(ArgumentError, match="model 1: training split is empty"):
        train_model_set(plan, SPEC, synth_gaussian_mixture(2, 3, 2, 1.0, seed=0))


def test_extract_matches_direct_prediction():
    models = train_model_set(PLAN, SPEC, DATA)
    tensor = extract_confidence_tensor(models, DATA)
    assert tensor.values.shape == (120, 6, 3)
    assert tensor.values.dtype == np.float32
    direct = predict_confidences(models.models[4], DATA.points).astype(np.float32)
    assert np.array_equal(tensor.values[:, 4, :], direct)
    assert np.array_equal(tensor.membership, PLAN.membership)


def test_extract_rejects_mismatched_dataset():
    models = train_model_set(PLAN, SPEC, DATA)
    other = synth_gaussian_mixture(3, 10, 4, 2.0, seed=1)
    with pytest.raises(ArgumentError, match="plan covers"):
        extract_confidence_tensor(models, other)
    wrong_dim = synth_gaussian_mixture(3, 40, 5, 2.0, seed=1)
    with pytest.raises(ArgumentError, match="dim"):
        extract_confidence_tensor(models, wrong_dim)


def test_tensor_roundtrip_exact(tmp_path):
    models = train_model_set(PLAN, SPEC, DATA)
    tensor = extract_confidence_tensor(models, DATA)
    path = save_tensor(tensor, tmp_path / "t.tensor")
    back = load_tensor(path)
    assert np.array_equal(back.values, tensor.values)
    assert np.array_equal(back.membership, tensor.membership)
    assert back.plan_seed == tensor.plan_seed


def test_tensor_save_byte_deterministic(tmp_path):
    models = train_model_set(PLAN, SPEC, DATA)
    tensor = extract_confidence_tensor(models, DATA)
    a = save_tensor(tensor, tmp_path / "a").read_bytes()
    b = save_tensor(tensor, tmp_path / "b").read_bytes()
    assert a == b


def test_tensor_load_rejects_corruption(tmp_path):
    models = train_model_set(PLAN, SPEC, DATA)
    tensor = extract_confidence_tensor(models, DATA)
    path = save_tensor(tensor, tmp_path / "t.tensor")
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(DataFormatError, match="payload bytes"):
        load_tensor(path)


def test_target_sets_work_too():
    plan = allocate_target_halves(120, 2, seed=30)
    models = train_model_set(plan, SPEC, DATA)
    assert len(models.models) == 4
    tensor = extract_confidence_tensor(models, DATA)
    assert np.array_equal(tensor.membership.sum(axis=1), np.full(120, 2))

def test_equal_derived_seeds_give_identical_models():
    # k=2, p=2: both models see the whole dataset, so the only difference is
    # the derived seed; pinning both to the same value collapses them
    from dataclasses import replace

    from bagmia.modelkit import train_classifier

    plan = allocate_reference(30, 2, 2, seed=1)
    data = synth_gaussian_mixture(3, 10, 4, 2.0, seed=2)
    models = train_model_set(plan, SPEC, data)
    assert not models.models[0].weights_equal(models.models[1])
    forced = train_classifier(replace(SPEC, seed=per_model_seed(SPEC.seed, 0)), data)
    assert models.models[0].weights_equal(forced)
    forced_other = train_classifier(replace(SPEC, seed=per_model_seed(SPEC.seed, 1)), data)
    assert models.models[1].weights_equal(forced_other)


def test_mean_training_split_size():
    plan = allocate_reference(1000, 100, 10, seed=13)
    sizes = plan.membership.sum(axis=0)
    # total cells are exact (1000 rows x 10 each), so the mean is exactly 100
    assert float(sizes.mean()) == 100.0


def test_single_model_tensor_is_direct_prediction():
    plan = allocate_reference(DATA.n_points, 1, 1, seed=8)
    models = train_model_set(plan, SPEC, DATA)
    tensor = extract_confidence_tensor(models, DATA)
    direct = predict_confidences(models.models[0], DATA.points).astype(np.float32)
    assert np.array_equal(tensor.values[:, 0, :], direct)


def test_tensor_fibres_are_probability_vectors():
    models = train_model_set(PLAN, SPEC, DATA)
    tensor = extract_confidence_tensor(models, DATA)
    sums = tensor.values.sum(axis=2)
    assert np.max(np.abs(sums - 1.0)) < 1e-6
    assert np.all(tensor.values > 0.0) and np.all(tensor.values < 1.0)
    assert np.array_equal(tensor.membership.sum(axis=1), np.full(120, 2))
