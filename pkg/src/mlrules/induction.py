"""Stagewise boosting of multi-label rules with greedy top-down refinement.

Each iteration fits one rule to the second-order statistics of the current
ensemble's predictions.  Candidate conditions are enumerated per attribute by
walking the covered examples in sorted order, so the statistics of each
candidate extend its predecessor's by the newly covered examples; the
condition and its complement are both evaluated from the running sums.
Candidate ranking runs through compiled batch kernels; the accepted candidate
of every refinement step is re-evaluated through the canonical solver path,
which also produces the rule's head.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .binning import BinConfig, BinMapping, aggregate_stats, expand_head, label_criteria, map_to_bins
from .linalg import (
    PackedSymmetric,
    dot,
    packed_diag_indices,
    packed_index_arrays,
    solve_symmetric,
    sym_mat_vec,
)
from .losses import EXAMPLE_WISE_LOGISTIC, LossFunction, batch_stats
from .rules import (
    EQUAL,
    GREATER,
    LESS_EQUAL,
    NOT_EQUAL,
    Condition,
    Ensemble,
    Rule,
    coverage_mask,
)
from .stats import StatSum

#: quality differences at or below this magnitude count as ties
TIE_EPSILON = 1e-12


class DegenerateData(ValueError):
    """No candidate condition exists (all sampled attributes are constant)."""


@dataclass(frozen=True)
class TrainConfig:
    rule_count: int = 5000
    shrinkage: float = 0.3
    l2_weight: float = 1.0
    bin_config: BinConfig | None = None
    feature_sample_fraction: float | None = None
    instance_sampling: bool = True
    seed: int = 0
    loss: LossFunction = LossFunction(EXAMPLE_WISE_LOGISTIC)

    def __post_init__(self):
        if self.rule_count < 1:
            raise ValueError("rule_count must be positive")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError("shrinkage must be in (0, 1]")
        if self.l2_weight < 0.0:
            raise ValueError("l2_weight must be non-negative")
        if self.feature_sample_fraction is not None and not 0.0 < self.feature_sample_fraction <= 1.0:
            raise ValueError("feature_sample_fraction must be in (0, 1]")
        if self.bin_config is not None and self.bin_config.l2_weight != self.l2_weight:
            object.__setattr__(self, "bin_config", replace(self.bin_config, l2_weight=self.l2_weight))

    def attribute_sample_count(self, attribute_count: int) -> int:
        fraction = self.feature_sample_fraction
        if fraction is None:
            return max(1, math.ceil(math.sqrt(attribute_count)))
        return max(1, math.ceil(fraction * attribute_count))


@dataclass(frozen=True)
class Evaluation:
    """Optimal scores, quality and (when binned) the label-to-bin mapping."""

    scores: np.ndarray
    quality: float
    mapping: BinMapping | None

    def head(self) -> np.ndarray:
        if self.mapping is None:
            return self.scores.copy()
        return expand_head(self.mapping, self.scores)


@dataclass(frozen=True)
class CandidateRef:
    """A scored refinement candidate, keyed for deterministic tie-breaking."""

    quality: float
    attribute: int
    operator_rank: int
    order_value: float
    condition: Condition

    def key(self):
        return (self.attribute, self.operator_rank, self.order_value)


class EvalTimer:
    """Accumulates wall time spent evaluating candidates, and their number."""

    def __init__(self):
        self.seconds = 0.0
        self.candidates = 0

    @contextmanager
    def measure(self, count: int):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds += time.perf_counter() - start
            self.candidates += count


def evaluate_candidate(stats: StatSum, l2_weight: float, bin_config: BinConfig | None = None) -> Evaluation:
    """Optimal head scores and quality for one candidate's statistics.

    Without binning this solves the full system (H + l2 I) p = -g and scores
    the solution as p.g + 0.5 p.(H p).  With binning, labels are first mapped
    to bins and the identical formulas are applied to the aggregated system;
    the returned scores then carry one entry per non-empty bin.
    """
    if bin_config is None:
        hessians = stats.hessian_sum
        scores = solve_symmetric(hessians.add_diagonal(l2_weight), -stats.gradient_sum)
        quality = dot(scores, stats.gradient_sum) + 0.5 * dot(scores, sym_mat_vec(hessians, scores))
        return Evaluation(scores, quality, None)
    mapping = map_to_bins(label_criteria(stats, l2_weight), bin_config)
    if mapping.bin_count == 0:
        return Evaluation(np.zeros(0), 0.0, mapping)
    agg = aggregate_stats(mapping, stats, l2_weight)
    scores = solve_symmetric(agg.hessians.add_diagonal(agg.regularization), -agg.gradients)
    quality = dot(scores, agg.gradients) + 0.5 * dot(scores, sym_mat_vec(agg.hessians, scores))
    return Evaluation(scores, quality, mapping)


@dataclass
class TrainReport:
    total_train_seconds: float = 0.0
    candidate_eval_seconds: float = 0.0
    rule_count: int = 0
    candidates_evaluated: int = 0


def bootstrap_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    """Multiplicity of each example under n draws with replacement."""
    return np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)


class _RuleSearch:
    """Greedy top-down search over one (sampled) training view."""

    def __init__(self, features, kinds, weighted_g, weighted_h, weights, config: TrainConfig, timer: EvalTimer):
        self.features = features
        self.kinds = kinds
        self.weighted_g = weighted_g
        self.weighted_h = weighted_h
        self.weights = weights
        self.config = config
        self.timer = timer
        label_count = weighted_g.shape[1]
        self.rows, self.cols = packed_index_arrays(label_count)
        self.diag = packed_diag_indices(label_count)
        self.total_bins = None
        self.singleton = False
        if config.bin_config is not None:
            self.total_bins = config.bin_config.resolve_bin_count(label_count)
            self.singleton = config.bin_config.singleton

    def _stat_sum(self, positions: np.ndarray) -> StatSum:
        g = self.weighted_g[positions].sum(axis=0)
        h = self.weighted_h[positions].sum(axis=0)
        return StatSum(g, PackedSymmetric(g.shape[0], h), float(self.weights[positions].sum()))

    def _evaluate(self, stats: StatSum) -> Evaluation:
        with self.timer.measure(1):
            return evaluate_candidate(stats, self.config.l2_weight, self.config.bin_config)

    def _eval_pairs(self, g_rows, h_rows, g_total, h_total):
        """Kernel qualities for candidate rows and their complements."""
        count = 2 * g_rows.shape[0]
        with self.timer.measure(count):
            try:
                if self.total_bins is None:
                    q_in, q_out = _kernels.eval_pairs_full(
                        g_rows, h_rows, g_total, h_total, self.rows, self.cols, self.config.l2_weight
                    )
                else:
                    q_in, q_out = _kernels.eval_pairs_binned(
                        g_rows, h_rows, g_total, h_total, self.rows, self.cols, self.diag,
                        self.config.l2_weight, self.total_bins, self.singleton
                    )
            except np.linalg.LinAlgError:
                q_in = np.full(g_rows.shape[0], np.nan)
                q_out = np.full(g_rows.shape[0], np.nan)
            if np.isnan(q_in).any() or np.isnan(q_out).any():
                self._eval_fallback(g_rows, h_rows, g_total, h_total, q_in, q_out)
        return q_in, q_out

    def _eval_fallback(self, g_rows, h_rows, g_total, h_total, q_in, q_out):
        """Re-evaluate rows whose factorization failed through the pivoting solver."""
        label_count = g_rows.shape[1]
        for i in np.nonzero(np.isnan(q_in))[0]:
            stats = StatSum(g_rows[i], PackedSymmetric(label_count, h_rows[i]), 1.0)
            q_in[i] = evaluate_candidate(stats, self.config.l2_weight, self.config.bin_config).quality
        for i in np.nonzero(np.isnan(q_out))[0]:
            stats = StatSum(g_total - g_rows[i], PackedSymmetric(label_count, h_total - h_rows[i]), 1.0)
            q_out[i] = evaluate_candidate(stats, self.config.l2_weight, self.config.bin_config).quality

    def _scan_numerical(self, attribute: int, covered: np.ndarray, totals: StatSum) -> CandidateRef | None:
        values = self.features[covered, attribute]
        order = np.argsort(values, kind="stable")
        sorted_values = values[order]
        change = np.nonzero(sorted_values[1:] != sorted_values[:-1])[0]
        if change.size == 0:
            return None
        group_starts = np.concatenate((np.zeros(1, dtype=np.int64), change + 1))
        sorted_rows = covered[order].astype(np.int64)
        g_rows = _kernels.grouped_prefix(self.weighted_g, sorted_rows, group_starts)[:-1]
        h_rows = _kernels.grouped_prefix(self.weighted_h, sorted_rows, group_starts)[:-1]
        thresholds = 0.5 * (sorted_values[change] + sorted_values[change + 1])
        q_le, q_gt = self._eval_pairs(g_rows, h_rows, totals.gradient_sum, totals.hessian_sum.entries)
        best = min(q_le.min(), q_gt.min())
        window = best + TIE_EPSILON
        hits_le = np.nonzero(q_le <= window)[0]
        if hits_le.size:
            i = int(hits_le[0])
            return CandidateRef(float(q_le[i]), attribute, 0, float(thresholds[i]),
                                Condition(attribute, LESS_EQUAL, float(thresholds[i])))
        i = int(np.nonzero(q_gt <= window)[0][0])
        return CandidateRef(float(q_gt[i]), attribute, 1, float(thresholds[i]),
                            Condition(attribute, GREATER, float(thresholds[i])))

    def _scan_nominal(self, attribute: int, covered: np.ndarray, totals: StatSum) -> CandidateRef | None:
        codes = self.features[covered, attribute]
        present, inverse = np.unique(codes, return_inverse=True)
        if present.size < 2:
            return None
        label_count = self.weighted_g.shape[1]
        g_rows = np.zeros((present.size, label_count))
        h_rows = np.zeros((present.size, self.weighted_h.shape[1]))
        np.add.at(g_rows, inverse, self.weighted_g[covered])
        np.add.at(h_rows, inverse, self.weighted_h[covered])
        q_eq, q_ne = self._eval_pairs(g_rows, h_rows, totals.gradient_sum, totals.hessian_sum.entries)
        best = min(q_eq.min(), q_ne.min())
        window = best + TIE_EPSILON
        hits_eq = np.nonzero(q_eq <= window)[0]
        if hits_eq.size:
            i = int(hits_eq[0])
            return CandidateRef(float(q_eq[i]), attribute, 0, float(present[i]),
                                Condition(attribute, EQUAL, float(present[i])))
        i = int(np.nonzero(q_ne <= window)[0][0])
        return CandidateRef(float(q_ne[i]), attribute, 1, float(present[i]),
                            Condition(attribute, NOT_EQUAL, float(present[i])))

    def run(self, attributes: np.ndarray) -> tuple[tuple[Condition, ...], Evaluation]:
        covered = np.arange(self.features.shape[0])
        totals = self._stat_sum(covered)
        current = self._evaluate(totals)
        body: list[Condition] = []
        first_step = True
        while True:
            candidates = []
            for attribute in attributes:
                if self.kinds[attribute] == "nominal":
                    found = self._scan_nominal(attribute, covered, totals)
                else:
                    found = self._scan_numerical(attribute, covered, totals)
                if found is not None:
                    candidates.append(found)
            if not candidates:
                if first_step:
                    raise DegenerateData("all sampled attributes are constant over the covered examples")
                break
            first_step = False
            best_quality = min(c.quality for c in candidates)
            chosen = min(
                (c for c in candidates if c.quality <= best_quality + TIE_EPSILON),
                key=CandidateRef.key,
            )
            if not chosen.quality < current.quality - TIE_EPSILON:
                break
            mask = chosen.condition.holds_matrix(self.features[covered])
            covered = covered[mask]
            totals = self._stat_sum(covered)
            current = self._evaluate(totals)
            body.append(chosen.condition)
            if covered.size < 2:
                break
        return tuple(body), current


def refine_rule(dataset, predictions: np.ndarray, config: TrainConfig, *,
                weights: np.ndarray | None = None,
                rng: np.random.Generator | None = None,
                timer: EvalTimer | None = None) -> Rule:
    """Grow one rule by greedy refinement against the current predictions.

    `weights` are per-example multiplicities (zero-weight examples take no
    part in the search); attribute candidates are drawn from a fresh random
    subset.  The returned head already includes the shrinkage factor.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if timer is None:
        timer = EvalTimer()
    features = np.asarray(dataset.features, dtype=np.float64)
    n, attribute_count = features.shape
    if n == 0:
        raise DegenerateData("empty dataset")
    if weights is None:
        weights = np.ones(n)
    sampled = np.nonzero(weights > 0)[0]
    if sampled.size == 0:
        raise DegenerateData("no example has positive weight")
    gradients, hessians = batch_stats(config.loss, dataset.labels[sampled], predictions[sampled])
    gradients *= weights[sampled, None]
    hessians *= weights[sampled, None]
    attribute_sample = config.attribute_sample_count(attribute_count)
    attributes = np.sort(rng.choice(attribute_count, size=attribute_sample, replace=False))
    search = _RuleSearch(features[sampled], dataset.attribute_kinds, gradients, hessians,
                         weights[sampled], config, timer)
    body, evaluation = search.run(attributes)
    return Rule(body, config.shrinkage * evaluation.head())


def train(dataset, config: TrainConfig) -> tuple[Ensemble, TrainReport]:
    """Fit a boosted rule ensemble; returns the model and timing figures.

    The first rule is the default rule: empty body, exact unbinned solve over
    all examples.  Every later iteration draws bootstrap weights (when
    instance sampling is on), refines a rule on the weighted statistics and
    updates the cached score sums of all covered examples.
    """
    _kernels.warm_up()
    features = np.asarray(dataset.features, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.float64)
    n, label_count = labels.shape
    if n == 0:
        raise DegenerateData("empty dataset")
    rng = np.random.default_rng(config.seed)
    timer = EvalTimer()
    started = time.perf_counter()

    ensemble = Ensemble([], label_count)
    scores = np.zeros((n, label_count))
    gradients, hessians = batch_stats(config.loss, labels, scores)
    totals = StatSum.from_rows(gradients, hessians)
    del gradients, hessians
    with timer.measure(1):
        default = evaluate_candidate(totals, config.l2_weight, None)
    default_rule = Rule((), config.shrinkage * default.scores)
    ensemble.append(default_rule)
    scores += default_rule.head

    for _ in range(1, config.rule_count):
        weights = bootstrap_weights(rng, n) if config.instance_sampling else np.ones(n)
        try:
            rule = refine_rule(dataset, scores, config, weights=weights, rng=rng, timer=timer)
        except DegenerateData:
            sampled = np.nonzero(weights > 0)[0]
            g, h = batch_stats(config.loss, labels[sampled], scores[sampled])
            stats = StatSum.from_rows(g, h, weights[sampled])
            with timer.measure(1):
                evaluation = evaluate_candidate(stats, config.l2_weight, config.bin_config)
            rule = Rule((), config.shrinkage * evaluation.head())
        ensemble.append(rule)
        covered = coverage_mask(rule, features)
        scores[covered] += rule.head

    report = TrainReport(
        total_train_seconds=time.perf_counter() - started,
        candidate_eval_seconds=timer.seconds,
        rule_count=len(ensemble.rules),
        candidates_evaluated=timer.candidates,
    )
    return ensemble, report
