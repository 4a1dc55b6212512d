"""Rule bodies, heads and ensembles, with prediction and serialization.

A rule body is a conjunction of attribute conditions; its head assigns a
confidence score to every label (zero meaning no prediction for that label).
An ensemble predicts by summing the heads of all covering rules and
discretizing the sign.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

LESS_EQUAL = "<="
GREATER = ">"
EQUAL = "=="
NOT_EQUAL = "!="

NUMERICAL_OPERATORS = (LESS_EQUAL, GREATER)
NOMINAL_OPERATORS = (EQUAL, NOT_EQUAL)
_ALL_OPERATORS = NUMERICAL_OPERATORS + NOMINAL_OPERATORS

#: deterministic tie-break rank of each operator within one attribute
OPERATOR_RANK = {LESS_EQUAL: 0, GREATER: 1, EQUAL: 0, NOT_EQUAL: 1}


class MissingValue(ValueError):
    """A condition referenced an attribute value that is not present."""


@dataclass(frozen=True)
class Condition:
    attribute: int
    operator: str
    value: float

    def __post_init__(self):
        if self.operator not in _ALL_OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        object.__setattr__(self, "attribute", int(self.attribute))
        object.__setattr__(self, "value", float(self.value))

    def holds(self, attribute_value: float) -> bool:
        if attribute_value is None or np.isnan(attribute_value):
            raise MissingValue(f"attribute {self.attribute} has no value")
        if self.operator == LESS_EQUAL:
            return attribute_value <= self.value
        if self.operator == GREATER:
            return attribute_value > self.value
        if self.operator == EQUAL:
            return attribute_value == self.value
        return attribute_value != self.value

    def holds_matrix(self, features: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over the rows of an (N, A) feature matrix."""
        column = features[:, self.attribute]
        if self.operator == LESS_EQUAL:
            return column <= self.value
        if self.operator == GREATER:
            return column > self.value
        if self.operator == EQUAL:
            return column == self.value
        return column != self.value

    def __str__(self):
        return f"x{self.attribute} {self.operator} {self.value!r}"


@dataclass(frozen=True)
class Rule:
    body: tuple[Condition, ...]
    head: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "head", np.asarray(self.head, dtype=np.float64))


def covers(rule: Rule, example: np.ndarray) -> bool:
    """True iff the example satisfies every condition of the rule's body."""
    return all(cond.holds(example[cond.attribute]) for cond in rule.body)


@dataclass
class Ensemble:
    rules: list[Rule] = field(default_factory=list)
    label_count: int = 0

    def __post_init__(self):
        for rule in self.rules:
            if rule.head.shape != (self.label_count,):
                raise ValueError("rule head length does not match the ensemble's label count")

    def append(self, rule: Rule):
        if rule.head.shape != (self.label_count,):
            raise ValueError("rule head length does not match the ensemble's label count")
        self.rules.append(rule)

    def truncated(self, rule_count: int) -> "Ensemble":
        return Ensemble(self.rules[:rule_count], self.label_count)


def predict_scores(ensemble: Ensemble, example: np.ndarray) -> np.ndarray:
    """Element-wise sum of the heads of all rules covering the example."""
    scores = np.zeros(ensemble.label_count)
    for rule in ensemble.rules:
        if covers(rule, example):
            scores += rule.head
    return scores


def predict_score_matrix(ensemble: Ensemble, features: np.ndarray) -> np.ndarray:
    """Score matrix (N, L) for all rows of a feature matrix."""
    features = np.asarray(features)
    scores = np.zeros((features.shape[0], ensemble.label_count))
    for rule in ensemble.rules:
        mask = coverage_mask(rule, features)
        scores[mask] += rule.head
    return scores


def coverage_mask(rule: Rule, features: np.ndarray) -> np.ndarray:
    mask = np.ones(features.shape[0], dtype=bool)
    for cond in rule.body:
        mask &= cond.holds_matrix(features)
    return mask


def discretize(scores: np.ndarray) -> np.ndarray:
    """Binary label vector: +1 for strictly positive scores, -1 otherwise."""
    return np.where(np.asarray(scores) > 0.0, 1, -1).astype(np.int8)


# -- serialization ----------------------------------------------------------

_CONDITION_RE = re.compile(r"^x(\d+) (<=|>|==|!=) (\S+)$")
_RULE_RE = re.compile(r"^IF (.*) THEN \((.*)\)$")


def rule_to_text(rule: Rule) -> str:
    body = " & ".join(f"x{c.attribute} {c.operator} {c.value!r}" for c in rule.body)
    head = ", ".join(repr(float(v)) for v in rule.head)
    return f"IF {body or 'TRUE'} THEN ({head})"


def rule_from_text(line: str) -> Rule:
    match = _RULE_RE.match(line.strip())
    if match is None:
        raise ValueError(f"not a rule line: {line!r}")
    body_text, head_text = match.groups()
    conditions = []
    if body_text != "TRUE":
        for part in body_text.split(" & "):
            cond = _CONDITION_RE.match(part)
            if cond is None:
                raise ValueError(f"bad condition {part!r}")
            attribute, operator, value = cond.groups()
            conditions.append(Condition(int(attribute), operator, float(value)))
    head = np.array([float(v) for v in head_text.split(", ")]) if head_text else np.empty(0)
    return Rule(tuple(conditions), head)


def ensemble_to_text(ensemble: Ensemble) -> str:
    return "\n".join(rule_to_text(rule) for rule in ensemble.rules) + "\n"


def ensemble_from_text(text: str, label_count: int) -> Ensemble:
    rules = [rule_from_text(line) for line in text.splitlines() if line.strip()]
    return Ensemble(rules, label_count)


def ensemble_to_json(ensemble: Ensemble) -> str:
    doc = {
        "label_count": ensemble.label_count,
        "rules": [
            {
                "body": [
                    {"attribute": c.attribute, "operator": c.operator, "value": c.value}
                    for c in rule.body
                ],
                "head": [float(v) for v in rule.head],
            }
            for rule in ensemble.rules
        ],
    }
    return json.dumps(doc, indent=2)


def ensemble_from_json(text: str) -> Ensemble:
    doc = json.loads(text)
    rules = [
        Rule(
            tuple(
                Condition(c["attribute"], c["operator"], c["value"]) for c in entry["body"]
            ),
            np.array(entry["head"], dtype=np.float64),
        )
        for entry in doc["rules"]
    ]
    return Ensemble(rules, doc["label_count"])
