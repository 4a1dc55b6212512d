"""Multi-label surrogate losses and their first and second derivatives.

Two losses are provided: an example-wise logistic loss that couples all
labels of an example (a surrogate for the subset 0/1 loss, with a dense
symmetric Hessian) and the label-wise logistic baseline that treats every
label independently (diagonal Hessian).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .linalg import PackedSymmetric, packed_diag_indices, packed_index_arrays, packed_length

EXAMPLE_WISE_LOGISTIC = "example-wise-logistic"
LABEL_WISE_LOGISTIC = "label-wise-logistic"

_KINDS = {EXAMPLE_WISE_LOGISTIC: False, LABEL_WISE_LOGISTIC: True}


@dataclass(frozen=True)
class LossFunction:
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {sorted(_KINDS)}")

    @property
    def decomposable(self) -> bool:
        return _KINDS[self.kind]


@dataclass(frozen=True)
class ExampleStats:
    """Gradient vector and Hessian matrix of the loss at one example's scores."""

    gradients: np.ndarray
    hessians: PackedSymmetric

    def __post_init__(self):
        if self.gradients.shape != (self.hessians.order,):
            raise ValueError("gradient length and Hessian order disagree")


def _validate(truth: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if truth.shape != scores.shape:
        raise ValueError(f"shape mismatch: truth {truth.shape} vs scores {scores.shape}")
    return truth, scores


def _example_wise_ratios(margins: np.ndarray) -> np.ndarray:
    """exp(m_l) / (1 + sum_j exp(m_j)), evaluated without overflow.

    Shifts by max(0, max(m)) so every exponent is non-positive.
    """
    shift = np.maximum(np.max(margins, axis=-1, keepdims=True), 0.0)
    e = np.exp(margins - shift)
    denom = np.exp(-shift) + np.sum(e, axis=-1, keepdims=True)
    return e / denom


def loss_value(loss: LossFunction, truth, scores) -> float:
    """Loss of one example given its true labels (+-1) and predicted scores."""
    truth, scores = _validate(truth, scores)
    margins = -truth * scores
    if loss.decomposable:
        # sum_l log(1 + exp(m_l)), the independent binary logistic loss
        return float(np.sum(np.logaddexp(0.0, margins)))
    shift = max(float(np.max(margins, initial=0.0)), 0.0)
    total = np.exp(-shift) + np.sum(np.exp(margins - shift))
    return float(shift + np.log(total))


def loss_values(loss: LossFunction, truth_matrix, score_matrix) -> np.ndarray:
    """Vectorized loss over the rows of an N x L truth/score pair."""
    truth = np.asarray(truth_matrix, dtype=np.float64)
    scores = np.asarray(score_matrix, dtype=np.float64)
    margins = -truth * scores
    if loss.decomposable:
        return np.sum(np.logaddexp(0.0, margins), axis=1)
    shift = np.maximum(np.max(margins, axis=1), 0.0)
    total = np.exp(-shift) + np.sum(np.exp(margins - shift[:, None]), axis=1)
    return shift + np.log(total)


def example_stats(loss: LossFunction, truth, scores) -> ExampleStats:
    """Analytic gradient vector and packed Hessian at the given scores."""
    truth, scores = _validate(truth, scores)
    g, hp = batch_stats(loss, truth[None, :], scores[None, :])
    return ExampleStats(g[0], PackedSymmetric(truth.shape[0], hp[0]))


def batch_stats(loss: LossFunction, truth_matrix, score_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Gradients and packed Hessians for every row, as (N, L) and (N, L(L+1)/2).

    The example-wise Hessian is diag(rho) - v v^T with rho_l = exp(-y_l f_l)/S
    and v_l = y_l rho_l; the label-wise Hessian is diagonal.
    """
    truth = np.asarray(truth_matrix, dtype=np.float64)
    scores = np.asarray(score_matrix, dtype=np.float64)
    if truth.shape != scores.shape:
        raise ValueError(f"shape mismatch: truth {truth.shape} vs scores {scores.shape}")
    n, label_count = truth.shape
    rows, cols = packed_index_arrays(label_count)
    diag = packed_diag_indices(label_count)
    margins = -truth * scores
    if loss.decomposable:
        sigma = expit(margins)
        gradients = -truth * sigma
        hessians = np.zeros((n, packed_length(label_count)))
        hessians[:, diag] = sigma * (1.0 - sigma)
        return gradients, hessians
    rho = _example_wise_ratios(margins)
    v = truth * rho
    gradients = -v
    hessians = -(v[:, rows] * v[:, cols])
    hessians[:, diag] = rho * (1.0 - rho)
    return gradients, hessians
