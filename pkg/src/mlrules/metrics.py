"""Multi-label evaluation measures, reported as percentages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeMismatch(ValueError):
    """Truth and prediction matrices do not share a shape."""


@dataclass(frozen=True)
class EvalResult:
    subset_zero_one: float
    hamming: float
    example_count: int


def _validate(truth, predicted) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.shape != predicted.shape or truth.ndim != 2:
        raise ShapeMismatch(f"truth {truth.shape} vs predicted {predicted.shape}")
    if truth.shape[0] == 0:
        raise ShapeMismatch("metrics need at least one example")
    return truth, predicted


def subset_zero_one(truth, predicted) -> float:
    """Percentage of examples whose predicted label vector differs anywhere."""
    truth, predicted = _validate(truth, predicted)
    wrong = np.any(truth != predicted, axis=1)
    return 100.0 * float(np.mean(wrong))


def hamming(truth, predicted) -> float:
    """Percentage of label cells predicted incorrectly."""
    truth, predicted = _validate(truth, predicted)
    return 100.0 * float(np.mean(truth != predicted))


def evaluate(truth, predicted) -> EvalResult:
    return EvalResult(
        subset_zero_one=subset_zero_one(truth, predicted),
        hamming=hamming(truth, predicted),
        example_count=int(np.asarray(truth).shape[0]),
    )
