"""Independent reference implementations used as test oracles.

Everything here is deliberately written with plain loops and without reusing
the library's vectorized or packed code paths, so that agreement between the
two is meaningful.
"""

import math

import numpy as np

from mlrules.binning import ZERO_BIN, BinConfig, BinMapping
from mlrules.losses import LossFunction, batch_stats, loss_value
from mlrules.stats import StatSum
from mlrules.linalg import PackedSymmetric


def fd_gradient(loss: LossFunction, truth, scores, step=1e-5) -> np.ndarray:
    """Central finite differences of loss_value."""
    scores = np.asarray(scores, dtype=np.float64)
    out = np.empty(scores.shape[0])
    for l in range(scores.shape[0]):
        plus = scores.copy()
        minus = scores.copy()
        plus[l] += step
        minus[l] -= step
        out[l] = (loss_value(loss, truth, plus) - loss_value(loss, truth, minus)) / (2 * step)
    return out


def fd_hessian(loss: LossFunction, truth, scores, step=1e-5) -> np.ndarray:
    """Second-order central differences of loss_value, as a dense matrix."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    out = np.empty((n, n))
    for r in range(n):
        for c in range(n):
            pp = scores.copy(); pp[r] += step; pp[c] += step
            pm = scores.copy(); pm[r] += step; pm[c] -= step
            mp = scores.copy(); mp[r] -= step; mp[c] += step
            mm = scores.copy(); mm[r] -= step; mm[c] -= step
            out[r, c] = (
                loss_value(loss, truth, pp)
                - loss_value(loss, truth, pm)
                - loss_value(loss, truth, mp)
                + loss_value(loss, truth, mm)
            ) / (4 * step * step)
    return out


def reference_map_to_bins(criteria, config: BinConfig):
    """Plain-python equal-width bin assignment; returns (assignment, m_neg, m_pos).

    Reimplements the mapping definition directly: proportional budget split
    with at least one bin per occurring sign, per-sign caps at the number of
    distinct values, equal widths from the per-sign minimum and maximum, and
    floor-based indices capped into the last bin.  Zero criteria map to -1.
    """
    criteria = [float(c) for c in criteria]
    label_count = len(criteria)
    if isinstance(config.bin_budget, int):
        total = min(config.bin_budget, label_count)
    else:
        total = max(1, math.ceil(config.bin_budget * label_count))
    negatives = sorted(c for c in criteria if c < 0.0)
    positives = sorted(c for c in criteria if c > 0.0)
    if negatives and positives:
        budget = max(total, 2)
        m_neg = round(budget * len(negatives) / (len(negatives) + len(positives)))
        m_neg = min(max(m_neg, 1), budget - 1)
        m_pos = budget - m_neg
    elif negatives:
        m_neg, m_pos = total, 0
    elif positives:
        m_neg, m_pos = 0, total
    else:
        return [ZERO_BIN] * label_count, 0, 0
    if negatives:
        m_neg = min(m_neg, len(set(negatives)))
    if positives:
        m_pos = min(m_pos, len(set(positives)))
    assignment = []
    for c in criteria:
        if c < 0.0:
            width = (negatives[-1] - negatives[0]) / m_neg
            if width > 0.0:
                index = min(math.floor((c - negatives[0]) / width) + 1, m_neg)
            else:
                index = 1
            assignment.append(index - 1)
        elif c > 0.0:
            width = (positives[-1] - positives[0]) / m_pos
            if width > 0.0:
                index = min(math.floor((c - positives[0]) / width) + 1, m_pos)
            else:
                index = 1
            assignment.append(m_neg + index - 1)
        else:
            assignment.append(ZERO_BIN)
    return assignment, m_neg, m_pos


def constrained_minimizer(stat_sum: StatSum, mapping: BinMapping, l2_weight: float) -> np.ndarray:
    """Minimizer of the full quadratic objective under the shared-score constraint.

    Substitutes one variable per non-empty bin into g.f + 0.5 f.(H+l2 I)f
    (zero for excluded labels) and solves the resulting reduced system, built
    with explicit double loops over label pairs.  Returns the full-length
    per-label score vector.
    """
    label_count = stat_sum.label_count
    compact = mapping.compact
    m = mapping.bin_count
    if m == 0:
        return np.zeros(label_count)
    dense = stat_sum.hessian_sum.to_dense() + l2_weight * np.eye(label_count)
    reduced = np.zeros((m, m))
    rhs = np.zeros(m)
    for r in range(label_count):
        br = compact[r]
        if br < 0:
            continue
        rhs[br] -= stat_sum.gradient_sum[r]
        for c in range(label_count):
            bc = compact[c]
            if bc < 0:
                continue
            reduced[br, bc] += dense[r, c]
    solution = np.linalg.solve(reduced, rhs)
    scores = np.zeros(label_count)
    for l in range(label_count):
        if compact[l] >= 0:
            scores[l] = solution[compact[l]]
    return scores


def random_stat_sum(rng: np.random.Generator, label_count: int, examples: int = 12,
                    loss: LossFunction | None = None) -> StatSum:
    """Statistics summed over random examples of a real loss (PSD Hessian)."""
    if loss is None:
        loss = LossFunction("example-wise-logistic")
    truth = rng.choice((-1.0, 1.0), size=(examples, label_count))
    scores = rng.normal(scale=1.5, size=(examples, label_count))
    gradients, hessians = batch_stats(loss, truth, scores)
    return StatSum(
        gradients.sum(axis=0),
        PackedSymmetric(label_count, hessians.sum(axis=0)),
        float(examples),
    )


def random_mapping(rng: np.random.Generator, label_count: int) -> BinMapping:
    """Random partition of the labels into bins, with some labels excluded."""
    bins = int(rng.integers(1, label_count + 1))
    assignment = rng.integers(0, bins, size=label_count)
    drop = rng.random(label_count) < 0.2
    assignment = np.where(drop, ZERO_BIN, assignment)
    return BinMapping(assignment, bins, 0)
