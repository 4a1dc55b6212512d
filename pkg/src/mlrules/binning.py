"""Dynamic label binning: group labels by their per-label optimal score and
aggregate gradient, Hessian and regularization statistics per bin.

The per-label criterion is the score that would be optimal if the label were
treated in isolation.  Labels with negative and positive criteria are kept in
strictly separate equal-width bins; labels with a zero criterion are excluded
and always receive a zero prediction.  Solving the reduced system under the
constraint that all labels of a bin share one score is exactly equivalent to
the constrained full system, which requires the aggregated Hessian diagonal
to include the complete within-bin block sum (off-diagonal pairs twice).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DimensionMismatch,
    PackedSymmetric,
    packed_index_arrays,
    packed_length,
)
from .stats import StatSum

#: assignment value of labels excluded from binning (zero criterion)
ZERO_BIN = -1

#: bin budget placing every label with a non-zero criterion in its own bin
SINGLETON = "singleton"


@dataclass(frozen=True)
class BinConfig:
    """Bin budget (fraction of the label count, an absolute count, or SINGLETON)
    and the L2 regularization weight."""

    bin_budget: float | int | str
    l2_weight: float = 1.0

    def __post_init__(self):
        if isinstance(self.bin_budget, str):
            if self.bin_budget != SINGLETON:
                raise ValueError(f"unknown bin budget {self.bin_budget!r}")
        elif isinstance(self.bin_budget, bool):
            raise ValueError("bin_budget must be a number")
        elif isinstance(self.bin_budget, int):
            if self.bin_budget < 1:
                raise ValueError(f"absolute bin budget must be >= 1, got {self.bin_budget}")
        else:
            if not 0.0 < self.bin_budget <= 1.0:
                raise ValueError(f"fractional bin budget must be in (0, 1], got {self.bin_budget}")
        if self.l2_weight < 0:
            raise ValueError(f"l2 weight must be >= 0, got {self.l2_weight}")

    @property
    def singleton(self) -> bool:
        return self.bin_budget == SINGLETON

    def resolve_bin_count(self, label_count: int) -> int:
        """Total bin budget for `label_count` labels; at least 1."""
        if self.singleton:
            return label_count
        if isinstance(self.bin_budget, int):
            return min(self.bin_budget, label_count)
        return max(1, math.ceil(self.bin_budget * label_count))


@dataclass(frozen=True)
class BinMapping:
    """Assignment of each label to a bin index, or ZERO_BIN for excluded labels.

    Bins 0 .. negative_bin_count-1 hold labels with negative criteria, the
    following positive_bin_count bins hold positive ones.  Bins may be empty;
    `compact`, `bin_count` and `bin_sizes` describe the non-empty bins only,
    in ascending raw-index order.
    """

    assignment: np.ndarray
    negative_bin_count: int
    positive_bin_count: int
    compact: np.ndarray = field(init=False)
    bin_count: int = field(init=False)
    bin_sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", assignment)
        raw_total = self.negative_bin_count + self.positive_bin_count
        used = assignment[assignment != ZERO_BIN]
        if used.size and (used.min() < 0 or used.max() >= raw_total):
            raise ValueError("bin assignment out of range")
        occupied = np.unique(used)
        remap = np.full(raw_total + 1, ZERO_BIN, dtype=np.int64)
        remap[occupied] = np.arange(occupied.size)
        compact = np.where(assignment == ZERO_BIN, ZERO_BIN, remap[assignment])
        object.__setattr__(self, "compact", compact)
        object.__setattr__(self, "bin_count", int(occupied.size))
        sizes = np.bincount(compact[compact >= 0], minlength=occupied.size).astype(np.int64)
        object.__setattr__(self, "bin_sizes", sizes)

    @property
    def label_count(self) -> int:
        return self.assignment.shape[0]

    def bins(self) -> list[np.ndarray]:
        """Label indices per raw bin (empty arrays for empty bins)."""
        raw_total = self.negative_bin_count + self.positive_bin_count
        return [np.nonzero(self.assignment == k)[0] for k in range(raw_total)]

    def zero_labels(self) -> np.ndarray:
        return np.nonzero(self.assignment == ZERO_BIN)[0]


@dataclass(frozen=True)
class AggregatedStats:
    """Statistics reduced to the non-empty bins of a mapping."""

    gradients: np.ndarray
    hessians: PackedSymmetric
    regularization: np.ndarray
    bin_sizes: np.ndarray


def label_criteria(stat_sum: StatSum, l2_weight: float) -> np.ndarray:
    """Per-label isolated optimum -g_l / (h_ll + l2), the binning criterion."""
    diag = stat_sum.hessian_sum.diagonal()
    denom = diag + l2_weight
    if np.any(denom == 0.0):
        raise ZeroDivisionError("zero Hessian diagonal with zero l2 weight")
    return -stat_sum.gradient_sum / denom


def split_bin_budget(total_bins: int, n_negative: int, n_positive: int) -> tuple[int, int]:
    """Split the total budget across the sign groups, proportional to their sizes.

    Each occurring sign gets at least one bin (a budget of 1 is widened to one
    bin per sign when both occur, since signs must not share a bin).
    """
    if n_negative == 0 and n_positive == 0:
        return 0, 0
    if n_negative == 0:
        return 0, total_bins
    if n_positive == 0:
        return total_bins, 0
    total = max(total_bins, 2)
    m_neg = int(np.round(total * n_negative / (n_negative + n_positive)))
    m_neg = min(max(m_neg, 1), total - 1)
    return m_neg, total - m_neg


def _equal_width_indices(values: np.ndarray, bin_count: int) -> np.ndarray:
    """1-based equal-width bin index per value, capped into the last bin."""
    lo = values.min()
    width = (values.max() - lo) / bin_count
    if width <= 0.0:
        return np.ones(values.shape[0], dtype=np.int64)
    idx = np.floor((values - lo) / width).astype(np.int64) + 1
    return np.minimum(idx, bin_count)


def map_to_bins(criteria: np.ndarray, config: BinConfig) -> BinMapping:
    """Assign every label to an equal-width, sign-separated bin.

    Labels with a zero criterion are excluded (ZERO_BIN).  The per-sign bin
    counts are capped by the number of distinct criterion values of that sign
    so no bin is empty by construction.
    """
    criteria = np.asarray(criteria, dtype=np.float64)
    label_count = criteria.shape[0]
    neg_mask = criteria < 0.0
    pos_mask = criteria > 0.0
    if config.singleton:
        # one bin per non-zero label, ordered by criterion so signs stay separated
        nonzero = np.nonzero(neg_mask | pos_mask)[0]
        order = np.argsort(criteria[nonzero], kind="stable")
        assignment = np.full(label_count, ZERO_BIN, dtype=np.int64)
        assignment[nonzero[order]] = np.arange(nonzero.size)
        return BinMapping(assignment, int(neg_mask.sum()), int(pos_mask.sum()))
    total = config.resolve_bin_count(label_count)
    m_neg, m_pos = split_bin_budget(total, int(neg_mask.sum()), int(pos_mask.sum()))
    assignment = np.full(label_count, ZERO_BIN, dtype=np.int64)
    if m_neg:
        values = criteria[neg_mask]
        m_neg = min(m_neg, np.unique(values).size)
        assignment[neg_mask] = _equal_width_indices(values, m_neg) - 1
    if m_pos:
        values = criteria[pos_mask]
        m_pos = min(m_pos, np.unique(values).size)
        assignment[pos_mask] = m_neg + _equal_width_indices(values, m_pos) - 1
    return BinMapping(assignment, m_neg, m_pos)


def aggregate_stats(mapping: BinMapping, stat_sum: StatSum, l2_weight: float) -> AggregatedStats:
    """Sum gradients and Hessian blocks per non-empty bin pair.

    The aggregated diagonal entry of a bin is the full within-bin block sum,
    i.e. every unordered off-diagonal pair contributes twice; the aggregated
    regularization is l2_weight times the bin size.
    """
    label_count = stat_sum.label_count
    if mapping.label_count != label_count:
        raise DimensionMismatch("mapping and statistics disagree in label count")
    m = mapping.bin_count
    compact = mapping.compact
    covered = compact >= 0
    gradients = np.bincount(
        compact[covered], weights=stat_sum.gradient_sum[covered], minlength=m
    )
    rows, cols = packed_index_arrays(label_count)
    br = compact[rows]
    bc = compact[cols]
    valid = (br >= 0) & (bc >= 0)
    hi = np.maximum(br, bc)
    lo = np.minimum(br, bc)
    target = hi * (hi + 1) // 2 + lo
    weights = np.where((rows != cols) & (br == bc), 2.0, 1.0) * stat_sum.hessian_sum.entries
    hessians = np.bincount(target[valid], weights=weights[valid], minlength=packed_length(m))
    return AggregatedStats(
        gradients=gradients,
        hessians=PackedSymmetric(m, hessians),
        regularization=l2_weight * mapping.bin_sizes.astype(np.float64),
        bin_sizes=mapping.bin_sizes.copy(),
    )


def expand_head(mapping: BinMapping, bin_scores: np.ndarray) -> np.ndarray:
    """Per-label score vector: each label takes its bin's score, excluded labels 0."""
    bin_scores = np.asarray(bin_scores, dtype=np.float64)
    if bin_scores.shape != (mapping.bin_count,):
        raise DimensionMismatch(
            f"{mapping.bin_count} non-empty bins but {bin_scores.shape} scores"
        )
    scores = np.zeros(mapping.label_count)
    covered = mapping.compact >= 0
    scores[covered] = bin_scores[mapping.compact[covered]]
    return scores
