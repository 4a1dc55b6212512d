"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
The two desk-scale benchmarks (criteria 7 and 8) train full ensembles and
take tens of minutes together.
"""

import json
import time

import numpy as np
import pytest

from mlrules.binning import SINGLETON, ZERO_BIN, BinConfig, aggregate_stats, expand_head, map_to_bins
from mlrules.cli import main as cli_main
from mlrules.data import synth_dataset
from mlrules.induction import TrainConfig, evaluate_candidate, train
from mlrules.linalg import PackedSymmetric, solve_symmetric
from mlrules.losses import EXAMPLE_WISE_LOGISTIC, LossFunction, example_stats
from mlrules.metrics import hamming, subset_zero_one

from helpers import (
    constrained_minimizer,
    fd_gradient,
    fd_hessian,
    random_mapping,
    random_stat_sum,
    reference_map_to_bins,
)

YEAST_ARFF = "tests/data/yeast.arff"


def _passed(criterion: int, detail: str):
    print(f"\nACCEPTANCE {criterion}: PASS - {detail}", flush=True)


def test_criterion_1_derivative_correctness():
    loss = LossFunction(EXAMPLE_WISE_LOGISTIC)
    rng = np.random.default_rng(101)
    started = time.perf_counter()
    worst_g, worst_h = 0.0, 0.0
    for _ in range(200):
        label_count = int(rng.integers(1, 9))
        truth = rng.choice((-1.0, 1.0), size=label_count)
        scores = rng.normal(scale=2.0, size=label_count)
        stats = example_stats(loss, truth, scores)
        fd_g = fd_gradient(loss, truth, scores)
        err_g = np.abs(stats.gradients - fd_g).max() / (1.0 + np.abs(fd_g).max())
        fd_h = fd_hessian(loss, truth, scores)
        err_h = np.abs(stats.hessians.to_dense() - fd_h).max() / (1.0 + np.abs(fd_h).max())
        worst_g = max(worst_g, err_g)
        worst_h = max(worst_h, err_h)
        assert err_g <= 1e-5
        assert err_h <= 1e-4
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    _passed(1, f"200 instances, max grad err {worst_g:.2e}, max hess err {worst_h:.2e}, {elapsed:.2f}s")


def test_criterion_2_solver_correctness():
    rng = np.random.default_rng(102)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(60):
        order = int(rng.integers(1, 17))
        factor = rng.standard_normal((order, order))
        spd = factor @ factor.T + 0.25 * np.eye(order)
        b = rng.standard_normal(order)
        x = solve_symmetric(PackedSymmetric.from_dense(spd), b)
        residual = np.abs(spd @ x - b).max() / (1.0 + np.abs(b).max())
        worst = max(worst, residual)
        assert residual <= 1e-8
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    _passed(2, f"60 SPD systems up to order 16, worst residual {worst:.2e}, {elapsed:.2f}s")


def test_criterion_3_constrained_optimum_oracle():
    rng = np.random.default_rng(103)
    checked = 0
    worst = 0.0
    while checked < 100:
        label_count = int(rng.integers(2, 11))
        stats = random_stat_sum(rng, label_count)
        mapping = random_mapping(rng, label_count)
        if mapping.bin_count == 0:
            continue
        agg = aggregate_stats(mapping, stats, 1.0)
        reduced = solve_symmetric(agg.hessians.add_diagonal(agg.regularization), -agg.gradients)
        ours = expand_head(mapping, reduced)
        oracle = constrained_minimizer(stats, mapping, 1.0)
        deviation = np.abs(ours - oracle).max()
        worst = max(worst, deviation)
        assert deviation <= 1e-8
        checked += 1
    worst_singleton = 0.0
    for _ in range(50):
        label_count = int(rng.integers(1, 11))
        stats = random_stat_sum(rng, label_count)
        exact = evaluate_candidate(stats, 1.0)
        binned = evaluate_candidate(stats, 1.0, BinConfig(SINGLETON))
        deviation = np.abs(binned.head() - exact.scores).max()
        worst_singleton = max(worst_singleton, deviation)
        assert deviation <= 1e-10
    _passed(3, f"100 constrained optima (max dev {worst:.2e}), "
               f"50 singleton reductions (max dev {worst_singleton:.2e})")


def test_criterion_4_binning_oracle():
    rng = np.random.default_rng(104)
    for trial in range(500):
        label_count = int(rng.integers(1, 26))
        criteria = rng.normal(size=label_count)
        if trial % 3 == 0:
            criteria = np.round(criteria, 1)  # provoke duplicates and caps
        criteria[rng.random(label_count) < 0.2] = 0.0
        if rng.random() < 0.5:
            config = BinConfig(int(rng.integers(1, label_count + 1)))
        else:
            config = BinConfig(float(rng.uniform(0.02, 1.0)))
        mapping = map_to_bins(criteria, config)
        expected, m_neg, m_pos = reference_map_to_bins(criteria, config)
        assert mapping.assignment.tolist() == expected
        assert (mapping.negative_bin_count, mapping.positive_bin_count) == (m_neg, m_pos)
        # range, sign separation, monotonicity
        for l in range(label_count):
            b = mapping.assignment[l]
            if criteria[l] == 0.0:
                assert b == ZERO_BIN
            elif criteria[l] < 0.0:
                assert 0 <= b < m_neg
            else:
                assert m_neg <= b < m_neg + m_pos
        for mask in (criteria < 0.0, criteria > 0.0):
            order = np.argsort(criteria[mask])
            assert np.all(np.diff(mapping.assignment[mask][order]) >= 0)
    _passed(4, "500 random criterion vectors match the brute-force mapping exactly")


def test_criterion_5_aggregation_conservation():
    rng = np.random.default_rng(105)
    for _ in range(200):
        label_count = int(rng.integers(2, 12))
        stats = random_stat_sum(rng, label_count)
        mapping = random_mapping(rng, label_count)
        l2_weight = float(rng.uniform(0.1, 3.0))
        agg = aggregate_stats(mapping, stats, l2_weight)
        covered = mapping.compact >= 0
        assert abs(agg.gradients.sum() - stats.gradient_sum[covered].sum()) <= 1e-12
        block = stats.hessian_sum.to_dense()[np.ix_(covered, covered)]
        assert abs(agg.hessians.to_dense().sum() - block.sum()) <= 1e-12
        assert np.array_equal(agg.regularization, l2_weight * mapping.bin_sizes)
    _passed(5, "gradient/Hessian totals conserved to 1e-12; regularization diagonal exact")


def test_criterion_6_end_to_end_exactness():
    dataset = synth_dataset(200, 10, 6, 0.5, seed=5)
    exact, _ = train(dataset, TrainConfig(rule_count=200, seed=17))
    binned, _ = train(dataset, TrainConfig(rule_count=200, seed=17, bin_config=BinConfig(SINGLETON)))
    assert len(exact.rules) == len(binned.rules) == 200
    worst = 0.0
    for a, b in zip(exact.rules, binned.rules):
        assert a.body == b.body
        worst = max(worst, float(np.abs(a.head - b.head).max()))
    assert worst <= 1e-10
    _passed(6, f"200 rules, identical bodies, max head deviation {worst:.2e}")


def _run_cli(argv):
    code = cli_main(argv)
    assert code == 0, f"cli failed with {code}: {argv}"


@pytest.mark.slow
def test_criterion_7_desk_scale_quality(tmp_path):
    import os

    if os.path.exists(YEAST_ARFF):
        source = ["--data", YEAST_ARFF, "--labels", "14", "--format", "arff", "--impute", "meanmode"]
        origin = "yeast.arff"
    else:
        # the public yeast data cannot be fetched in this environment; a
        # same-shape synthetic stand-in (2417 examples, 103 attributes,
        # 14 labels) exercises the identical protocol
        source = ["--format", "synth", "--synth", "2417,103,14,0.5"]
        origin = "synthetic stand-in (2417x103, L=14)"
    base = ["run", *source, "--rules", "1000", "--folds", "10", "--seed", "7", "--threads", "2"]
    out_exact = tmp_path / "exact.json"
    out_binned = tmp_path / "binned.json"
    _run_cli(base + ["--out", str(out_exact)])
    _run_cli(base + ["--bins", "2", "--out", str(out_binned)])
    exact = json.loads(out_exact.read_text())["summary"]["metrics"]["subset_zero_one"]
    binned = json.loads(out_binned.read_text())["summary"]["metrics"]["subset_zero_one"]
    gap = abs(binned - exact)
    assert gap <= 3.0, f"2-bin subset 0/1 {binned:.2f} vs unbinned {exact:.2f}"
    _passed(7, f"{origin}: subset 0/1 unbinned {exact:.2f} vs 2 bins {binned:.2f} (gap {gap:.2f} <= 3.00)")


@pytest.mark.slow
def test_criterion_8_desk_scale_speedup(tmp_path):
    base = ["run", "--format", "synth", "--synth", "2000,20,128,0.5",
            "--rules", "200", "--folds", "1", "--seed", "11"]
    out_binned = tmp_path / "binned.json"
    out_exact = tmp_path / "exact.json"
    _run_cli(base + ["--bins", "8", "--out", str(out_binned)])
    _run_cli(base + ["--out", str(out_exact)])
    binned = json.loads(out_binned.read_text())["folds"][0]["timing"]["candidate_eval_seconds"]
    exact = json.loads(out_exact.read_text())["folds"][0]["timing"]["candidate_eval_seconds"]
    ratio = binned / exact
    assert ratio <= 0.5, f"binned eval time {binned:.1f}s vs unbinned {exact:.1f}s (ratio {ratio:.3f})"
    _passed(8, f"candidate evaluation {binned:.1f}s with 8 bins vs {exact:.1f}s unbinned "
               f"(ratio {ratio:.3f} <= 0.5, speedup {exact / binned:.2f}x)")


def test_criterion_9_metric_unit_suite():
    truth = np.ones((4, 3), dtype=int)
    predicted = truth.copy()
    predicted[0, 1] = -1
    assert subset_zero_one(truth, truth) == 0.0
    assert subset_zero_one(truth, predicted) == 25.0
    assert subset_zero_one(truth, -truth) == 100.0
    assert hamming(truth, truth) == 0.0
    assert hamming(np.ones((1, 4), dtype=int), np.array([[1, -1, 1, 1]])) == 25.0
    assert hamming(truth, -truth) == 100.0
    rng = np.random.default_rng(109)
    for _ in range(1000):
        n = int(rng.integers(1, 16))
        l = int(rng.integers(1, 9))
        a = rng.choice((-1, 1), size=(n, l))
        b = rng.choice((-1, 1), size=(n, l))
        assert hamming(a, b) <= subset_zero_one(a, b)
    _passed(9, "metric examples exact; hamming <= subset 0/1 on 1000 random pairs")


def _metric_sections(path):
    doc = json.loads(path.read_text())
    return json.dumps(
        [fold["metrics"] for fold in doc["folds"]] + [doc["summary"]["metrics"]],
        sort_keys=True,
    )


def test_criterion_10_determinism(tmp_path):
    flags = ["run", "--format", "synth", "--synth", "150,6,5,0.5",
             "--rules", "30", "--folds", "4", "--seed", "23"]
    reference = None
    for run_index, threads in enumerate(("1", "1", "2", "4")):
        out = tmp_path / f"run{run_index}.json"
        _run_cli(flags + ["--threads", threads, "--out", str(out)])
        sections = _metric_sections(out)
        if reference is None:
            reference = sections
        assert sections == reference, f"metric sections diverged at threads={threads}"
    _passed(10, "metric sections byte-identical across repeated runs and threads 1/2/4")
