"""Run reports: JSON serialization, plain-text summaries and run comparison."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .metrics import EvalResult


class IncompatibleReports(ValueError):
    """Two reports do not share a dataset and fold structure."""


@dataclass
class FoldResult:
    fold: int
    metrics: EvalResult
    total_train_seconds: float
    candidate_eval_seconds: float
    rule_count: int
    candidates_evaluated: int


@dataclass
class RunReport:
    config: dict
    dataset: dict
    folds: list[FoldResult] = field(default_factory=list)

    def summary(self) -> dict:
        count = len(self.folds)
        mean = lambda xs: sum(xs) / count
        return {
            "metrics": {
                "subset_zero_one": mean([f.metrics.subset_zero_one for f in self.folds]),
                "hamming": mean([f.metrics.hamming for f in self.folds]),
            },
            "timing": {
                "total_train_seconds": mean([f.total_train_seconds for f in self.folds]),
                "candidate_eval_seconds": mean([f.candidate_eval_seconds for f in self.folds]),
            },
        }

    def to_dict(self) -> dict:
        return {
            "schema": "mlrules-report/1",
            "config": self.config,
            "dataset": self.dataset,
            "folds": [
                {
                    "fold": f.fold,
                    "metrics": asdict(f.metrics),
                    "timing": {
                        "total_train_seconds": f.total_train_seconds,
                        "candidate_eval_seconds": f.candidate_eval_seconds,
                    },
                    "model": {
                        "rule_count": f.rule_count,
                        "candidates_evaluated": f.candidates_evaluated,
                    },
                }
                for f in self.folds
            ],
            "summary": self.summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        folds = [
            FoldResult(
                fold=entry["fold"],
                metrics=EvalResult(**entry["metrics"]),
                total_train_seconds=entry["timing"]["total_train_seconds"],
                candidate_eval_seconds=entry["timing"]["candidate_eval_seconds"],
                rule_count=entry["model"]["rule_count"],
                candidates_evaluated=entry["model"]["candidates_evaluated"],
            )
            for entry in doc["folds"]
        ]
        return cls(config=doc["config"], dataset=doc["dataset"], folds=folds)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def summary_table(self) -> str:
        lines = [
            f"dataset: {self.dataset.get('source', '?')}  "
            f"(N={self.dataset.get('examples')}, A={self.dataset.get('attributes')}, "
            f"L={self.dataset.get('labels')})",
            f"{'fold':>4}  {'subset 0/1':>10}  {'hamming':>8}  {'train s':>9}  {'cand.eval s':>11}",
        ]
        for f in self.folds:
            lines.append(
                f"{f.fold:>4}  {f.metrics.subset_zero_one:>10.2f}  {f.metrics.hamming:>8.2f}"
                f"  {f.total_train_seconds:>9.2f}  {f.candidate_eval_seconds:>11.2f}"
            )
        s = self.summary()
        lines.append(
            f"{'avg':>4}  {s['metrics']['subset_zero_one']:>10.2f}  {s['metrics']['hamming']:>8.2f}"
            f"  {s['timing']['total_train_seconds']:>9.2f}  {s['timing']['candidate_eval_seconds']:>11.2f}"
        )
        return "\n".join(lines)


def compare_runs(report_a: RunReport, report_b: RunReport) -> dict:
    """Per-fold and average speedup of run B over run A, plus metric deltas.

    Speedup is time_a / time_b; metric deltas are B minus A.
    """
    a, b = report_a, report_b
    if len(a.folds) != len(b.folds):
        raise IncompatibleReports(f"fold counts differ: {len(a.folds)} vs {len(b.folds)}")
    if a.dataset.get("labels") != b.dataset.get("labels"):
        raise IncompatibleReports("label counts differ")
    for fa, fb in zip(a.folds, b.folds):
        if fa.metrics.example_count != fb.metrics.example_count:
            raise IncompatibleReports(
                f"fold {fa.fold} evaluates {fa.metrics.example_count} vs "
                f"{fb.metrics.example_count} examples"
            )
    folds = []
    for fa, fb in zip(a.folds, b.folds):
        folds.append(
            {
                "fold": fa.fold,
                "speedup_total": fa.total_train_seconds / fb.total_train_seconds,
                "speedup_candidate_eval": (
                    fa.candidate_eval_seconds / fb.candidate_eval_seconds
                    if fb.candidate_eval_seconds > 0
                    else float("inf")
                ),
                "delta_subset_zero_one": fb.metrics.subset_zero_one - fa.metrics.subset_zero_one,
                "delta_hamming": fb.metrics.hamming - fa.metrics.hamming,
            }
        )
    count = len(folds)
    average = {
        key: sum(f[key] for f in folds) / count
        for key in ("speedup_total", "speedup_candidate_eval", "delta_subset_zero_one", "delta_hamming")
    }
    return {"folds": folds, "average": average}


def comparison_table(comparison: dict) -> str:
    lines = [
        f"{'fold':>4}  {'speedup':>8}  {'eval speedup':>12}  {'d subset':>9}  {'d hamming':>9}"
    ]
    for f in comparison["folds"]:
        lines.append(
            f"{f['fold']:>4}  {f['speedup_total']:>8.2f}  {f['speedup_candidate_eval']:>12.2f}"
            f"  {f['delta_subset_zero_one']:>+9.2f}  {f['delta_hamming']:>+9.2f}"
        )
    avg = comparison["average"]
    lines.append(
        f"{'avg':>4}  {avg['speedup_total']:>8.2f}  {avg['speedup_candidate_eval']:>12.2f}"
        f"  {avg['delta_subset_zero_one']:>+9.2f}  {avg['delta_hamming']:>+9.2f}"
    )
    return "\n".join(lines)
