import numpy as np
import pytest

from mlrules.metrics import ShapeMismatch, evaluate, hamming, subset_zero_one


def test_identical_matrices_score_zero():
    truth = np.array([[1, -1], [-1, -1]])
    assert subset_zero_one(truth, truth) == 0.0
    assert hamming(truth, truth) == 0.0


def test_single_cell_error_fails_whole_row():
    truth = np.ones((4, 3), dtype=int)
    predicted = truth.copy()
    predicted[0, 1] = -1
    assert subset_zero_one(truth, predicted) == 25.0
    assert hamming(truth, predicted) == pytest.approx(100.0 / 12.0)


def test_everything_wrong():
    truth = np.ones((3, 2), dtype=int)
    assert subset_zero_one(truth, -truth) == 100.0
    assert hamming(truth, -truth) == 100.0


def test_hamming_single_row():
    truth = np.array([[1, 1, 1, 1]])
    predicted = np.array([[1, -1, 1, 1]])
    assert hamming(truth, predicted) == 25.0


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        subset_zero_one(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        hamming(np.ones((0, 2)), np.ones((0, 2)))


def test_hamming_bounded_by_subset():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 20))
        l = int(rng.integers(1, 10))
        truth = rng.choice((-1, 1), size=(n, l))
        predicted = rng.choice((-1, 1), size=(n, l))
        assert hamming(truth, predicted) <= subset_zero_one(truth, predicted)


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    truth = rng.choice((-1, 1), size=(15, 6))
    predicted = rng.choice((-1, 1), size=(15, 6))
    rows = rng.permutation(15)
    cols = rng.permutation(6)
    for metric in (subset_zero_one, hamming):
        base = metric(truth, predicted)
        assert metric(truth[rows], predicted[rows]) == base
        assert metric(truth[:, cols], predicted[:, cols]) == base


def test_evaluate_bundles_both():
    truth = np.array([[1, -1], [1, 1]])
    predicted = np.array([[1, -1], [-1, 1]])
    result = evaluate(truth, predicted)
    assert result.subset_zero_one == 50.0
    assert result.hamming == 25.0
    assert result.example_count == 2
