"""Weighted sums of per-example gradients and Hessians over a covered set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DimensionMismatch, PackedSymmetric, packed_length
from .losses import ExampleStats


class NegativeWeight(ValueError):
    """A subtraction would leave a negative covered weight."""


@dataclass(frozen=True)
class StatSum:
    """Element-wise weighted sums of gradients/Hessians plus the total weight."""

    gradient_sum: np.ndarray
    hessian_sum: PackedSymmetric
    covered_weight: float

    def __post_init__(self):
        object.__setattr__(self, "gradient_sum", np.asarray(self.gradient_sum, dtype=np.float64))
        if self.gradient_sum.shape != (self.hessian_sum.order,):
            raise DimensionMismatch("gradient length and Hessian order disagree")
        if self.covered_weight < 0:
            raise NegativeWeight(f"covered weight {self.covered_weight} is negative")

    @property
    def label_count(self) -> int:
        return self.hessian_sum.order

    @classmethod
    def zeros(cls, label_count: int) -> "StatSum":
        return cls(np.zeros(label_count), PackedSymmetric.zeros(label_count), 0.0)

    @classmethod
    def from_rows(cls, gradients: np.ndarray, hessians: np.ndarray, weights=None) -> "StatSum":
        """Batch accumulation over (N, L) gradient and (N, P) packed Hessian rows."""
        gradients = np.asarray(gradients, dtype=np.float64)
        hessians = np.asarray(hessians, dtype=np.float64)
        n, label_count = gradients.shape
        if hessians.shape != (n, packed_length(label_count)):
            raise DimensionMismatch("hessian rows do not match gradient rows")
        if weights is None:
            g = gradients.sum(axis=0)
            h = hessians.sum(axis=0)
            w = float(n)
        else:
            weights = np.asarray(weights, dtype=np.float64)
            g = weights @ gradients
            h = weights @ hessians
            w = float(weights.sum())
        return cls(g, PackedSymmetric(label_count, h), w)


def add_example(total: StatSum, stats: ExampleStats, weight: float) -> StatSum:
    """New sum with one example's statistics added at the given weight."""
    if weight < 0:
        raise NegativeWeight(f"example weight {weight} is negative")
    if stats.hessians.order != total.label_count:
        raise DimensionMismatch("example stats do not match the accumulated label count")
    return StatSum(
        total.gradient_sum + weight * stats.gradients,
        PackedSymmetric(total.label_count, total.hessian_sum.entries + weight * stats.hessians.entries),
        total.covered_weight + weight,
    )


def subtract_from_total(total: StatSum, partial: StatSum) -> StatSum:
    """Statistics of the complement set: total minus a previously accumulated subset."""
    if partial.label_count != total.label_count:
        raise DimensionMismatch("operands accumulate different label counts")
    if partial.covered_weight > total.covered_weight:
        raise NegativeWeight(
            f"partial weight {partial.covered_weight} exceeds total {total.covered_weight}"
        )
    return StatSum(
        total.gradient_sum - partial.gradient_sum,
        PackedSymmetric(total.label_count, total.hessian_sum.entries - partial.hessian_sum.entries),
        total.covered_weight - partial.covered_weight,
    )
