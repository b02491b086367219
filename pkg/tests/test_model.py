"""Classifier correctness: gradients, probabilities, metrics, projection."""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from seqlab.labels import SOURCE_MANUAL, LabelStore
from seqlab.model import (
    ModelLoop,
    TrainConfig,
    evaluate,
    feature_matrix,
    feature_names,
    featurize,
    loss_and_grad,
    macro_f1,
    pca_coords,
    project,
    softmax,
    train,
)
from seqlab.types import Dataset

from conftest import dataset_from_strings


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(501)
    eps = 1e-6
    for _ in range(50):
        n = int(rng.integers(4, 20))
        d = int(rng.integers(2, 8))
        k = int(rng.integers(2, 5))
        x = rng.normal(size=(n, d))
        y = rng.integers(0, k, size=n)
        y[:k] = np.arange(k)  # every class present
        weights = rng.normal(scale=0.5, size=(k, d))
        biases = rng.normal(scale=0.5, size=k)
        l2 = float(rng.uniform(0.0, 0.1))
        _, grad_w, grad_b = loss_and_grad(weights, biases, x, y, l2)

        def loss_at(w, b):
            return loss_and_grad(w, b, x, y, l2)[0]

        for idx in np.ndindex(weights.shape):
            bump = np.zeros_like(weights)
            bump[idx] = eps
            numeric = (loss_at(weights + bump, biases) - loss_at(weights - bump, biases)) / (2 * eps)
            denom = max(abs(numeric), abs(grad_w[idx]), 1e-8)
            assert abs(numeric - grad_w[idx]) / denom < 1e-5
        for j in range(k):
            bump = np.zeros_like(biases)
            bump[j] = eps
            numeric = (loss_at(weights, biases + bump) - loss_at(weights, biases - bump)) / (2 * eps)
            denom = max(abs(numeric), abs(grad_b[j]), 1e-8)
            assert abs(numeric - grad_b[j]) / denom < 1e-5


def small_labeled_dataset(seed: int = 0) -> tuple[Dataset, dict[str, str]]:
    rng = random.Random(seed)
    strings, labels = {}, {}
    for i in range(30):
        vid = f"v{i:02d}"
        if i % 3 == 0:
            s = "AB" * rng.randint(2, 4)
            labels[vid] = "ab"
        elif i % 3 == 1:
            s = "CD" * rng.randint(2, 4)
            labels[vid] = "cd"
        else:
            s = "AC" * rng.randint(2, 4)
            labels[vid] = "ac"
        strings[vid] = s
    embeddings = {vid: [rng.uniform(-1, 1) + 2.0, rng.uniform(-1, 1)] for vid in strings}
    dataset = dataset_from_strings(strings, embeddings=embeddings, class_ids=["ab", "ac", "cd"])
    return dataset, labels


def test_probability_rows_sum_to_one():
    dataset, labels = small_labeled_dataset()
    ids = sorted(labels)
    model = train(ids, labels, dataset, TrainConfig(epochs=50))
    probs = model.predict_proba(feature_matrix(ids, dataset))
    assert probs.shape == (len(ids), 3)
    assert np.all(probs >= 0.0) and np.all(probs <= 1.0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_macro_f1_matches_independent_recompute():
    rng = random.Random(77)
    dataset, labels = small_labeled_dataset()
    ids = sorted(labels)
    model = train(ids, labels, dataset, TrainConfig(epochs=50))
    noisy = {vid: rng.choice(["ab", "ac", "cd"]) for vid in ids}
    record = evaluate(model, ids, noisy, dataset)
    confusion = record.confusion_matrix
    k = len(confusion)
    scores = []
    for c in range(k):
        tp = confusion[c][c]
        fn = sum(confusion[c]) - tp
        fp = sum(confusion[r][c] for r in range(k)) - tp
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2 * tp / denom)
    assert record.overall_f1 == sum(scores) / len(scores)
    assert record.overall_f1 == macro_f1(confusion)
    assert sum(sum(row) for row in confusion) == len(ids)


def test_macro_f1_handles_empty_classes():
    assert macro_f1([[2, 0], [0, 2]]) == 1.0
    assert macro_f1([[0, 2], [2, 0]]) == 0.0
    assert macro_f1([[0, 0], [0, 0]]) == 0.0


def test_training_is_deterministic_under_seed():
    dataset, labels = small_labeled_dataset()
    ids = sorted(labels)
    a = train(ids, labels, dataset, TrainConfig(epochs=40, seed=9))
    b = train(ids, labels, dataset, TrainConfig(epochs=40, seed=9))
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.biases, b.biases)
    c = train(ids, labels, dataset, TrainConfig(epochs=40, seed=10))
    assert not np.array_equal(a.weights, c.weights)


def test_train_learns_separable_classes():
    dataset, labels = small_labeled_dataset()
    ids = sorted(labels)
    model = train(ids, labels, dataset, TrainConfig(epochs=200))
    record = evaluate(model, ids, labels, dataset)
    assert record.overall_f1 > 0.95
    assert set(record.per_class_accuracy) == {"ab", "ac", "cd"}


def test_train_validation():
    dataset, labels = small_labeled_dataset()
    with pytest.raises(KeyError):
        train(["missing"], labels, dataset)
    single = {vid: "ab" for vid in list(labels)[:4]}
    with pytest.raises(ValueError):
        train(sorted(single), single, dataset)


def test_featurize_is_ingestion_order_invariant():
    strings = {"a": "ABAB", "b": "BA", "c": "AABB"}
    forward = dataset_from_strings(strings)
    backward = dataset_from_strings(dict(reversed(list(strings.items()))))
    for vid in strings:
        assert np.array_equal(
            featurize(forward.sequences[vid], forward),
            featurize(backward.sequences[vid], backward),
        )


def test_feature_blocks_count_events_and_bigrams():
    dataset = dataset_from_strings({"a": "ABA", "b": "BB"})
    names = feature_names(dataset)
    vec = featurize(dataset.sequences["a"], dataset)
    assert len(names) == len(vec) == 2 + 4
    by_name = dict(zip(names, vec))
    assert by_name["count:A"] == 2 and by_name["count:B"] == 1
    assert by_name["bigram:AB"] == 1 and by_name["bigram:BA"] == 1
    assert by_name["bigram:AA"] == 0


def test_embedding_block_requires_full_coverage():
    strings = {"a": "AB", "b": "BA"}
    partial = dataset_from_strings(strings, embeddings={"a": [1.0, 0.0]})
    full = dataset_from_strings(strings, embeddings={"a": [1.0, 0.0], "b": [0.0, 1.0]})
    assert len(featurize(partial.sequences["a"], partial)) == 6
    assert len(featurize(full.sequences["a"], full)) == 8
    assert feature_names(full)[-2:] == ["emb:0", "emb:1"]


def test_softmax_shift_invariance():
    z = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    assert np.allclose(softmax(z), softmax(z + 100.0))
    assert np.allclose(softmax(z).sum(axis=1), 1.0)


def test_classifier_record_round_trip():
    dataset, labels = small_labeled_dataset()
    ids = sorted(labels)
    model = train(ids, labels, dataset, TrainConfig(epochs=30))
    clone = type(model).from_record(model.to_record())
    x = feature_matrix(ids, dataset)
    assert np.allclose(model.predict_proba(x), clone.predict_proba(x))
    assert clone.class_ids == model.class_ids


def test_pca_preserves_planar_distances():
    rng = np.random.default_rng(212)
    basis = np.linalg.qr(rng.normal(size=(6, 2)))[0]  # orthonormal 6x2
    plane_points = rng.normal(size=(40, 2)) * [3.0, 1.5]
    coords_high = plane_points @ basis.T + rng.normal(size=6) * 0.0
    strings = {f"v{i:02d}": "AB" for i in range(40)}
    embeddings = {f"v{i:02d}": coords_high[i].tolist() for i in range(40)}
    dataset = dataset_from_strings(strings, embeddings=embeddings)
    projected = pca_coords(dataset)
    ids = sorted(projected)
    low = np.array([projected[vid] for vid in ids])
    high = np.array([embeddings[vid] for vid in ids])
    for i, j in itertools.combinations(range(8), 2):
        d_low = np.linalg.norm(low[i] - low[j])
        d_high = np.linalg.norm(high[i] - high[j])
        assert d_low == pytest.approx(d_high, abs=1e-6)


def test_project_precomputed_passthrough_and_errors():
    dataset, labels = small_labeled_dataset()
    coords = {vid: (float(i), float(-i)) for i, vid in enumerate(sorted(labels))}
    result = project(dataset, precomputed=coords)
    assert result.coords == coords
    assert set(result.errors.values()) == {0.0}
    with pytest.raises(KeyError):
        project(dataset, precomputed={"ghost": (0.0, 0.0)})


def test_project_perfect_model_zeroes_labeled_errors():
    dataset, labels = small_labeled_dataset()
    ids = sorted(labels)
    model = train(ids, labels, dataset, TrainConfig(epochs=400))
    result = project(dataset, model=model, labels=labels)
    labeled_errors = [result.errors[vid] for vid in ids]
    assert max(labeled_errors) < 0.05
    unlabeled = project(dataset, model=model, labels={})
    for vid in ids:
        assert 0.0 <= unlabeled.errors[vid] <= 1.0


def test_model_loop_threshold_and_force():
    dataset, labels = small_labeled_dataset()
    store = LabelStore(["ab", "ac", "cd"], sorted(labels))
    loop = ModelLoop(dataset=dataset, store=store, threshold=5, config=TrainConfig(epochs=30))
    ids = sorted(labels)
    store.apply_labels(ids[:2], "ab", SOURCE_MANUAL, iteration=1)
    store.apply_labels(ids[2:4], "cd", SOURCE_MANUAL, iteration=1)
    assert loop.maybe_retrain() is None  # 4 < 5
    assert loop.new_since_retrain == 4
    outcome = loop.maybe_retrain(force=True)
    assert outcome is not None
    _, record = outcome
    assert record.iteration == 1
    assert loop.iteration == 1
    assert loop.new_since_retrain == 0
    store.apply_labels(ids[4:10], "ac", SOURCE_MANUAL, iteration=2)
    assert loop.maybe_retrain() is not None  # 6 >= 5
    assert loop.iteration == 2
