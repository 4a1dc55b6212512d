"""Command line driver for training, cross-validation and run comparison."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data as data_io
from . import metrics as metrics_mod
from .binning import BinConfig
from .induction import TrainConfig, train
from .losses import EXAMPLE_WISE_LOGISTIC, LABEL_WISE_LOGISTIC, LossFunction
from .report import FoldResult, IncompatibleReports, RunReport, compare_runs, comparison_table
from .rules import discretize, ensemble_to_json, predict_score_matrix

LOSS_NAMES = {"exwlog": EXAMPLE_WISE_LOGISTIC, "lwlog": LABEL_WISE_LOGISTIC}


def _parse_bins(text: str):
    if text == "none":
        return None
    if text == "singleton":
        return text
    try:
        value = int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"--bins must be 'none', 'singleton', a fraction or an integer, got {text!r}"
            )
    if isinstance(value, int) and value < 1:
        raise argparse.ArgumentTypeError("absolute bin count must be >= 1")
    if isinstance(value, float) and not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError("fractional bin budget must be in (0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlrules", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate under cross validation")
    run.add_argument("--data", type=Path, help="dataset path (arff or csv)")
    run.add_argument("--labels", type=int, help="number of trailing label columns")
    run.add_argument("--labels-xml", type=Path, help="XML file naming the label attributes (arff)")
    run.add_argument("--label-prefix", help="label columns are those whose name starts with this (csv)")
    run.add_argument("--format", choices=("arff", "csv", "synth"), help="input format (default: by extension)")
    run.add_argument("--synth", help="synthetic dataset as n,a,l,corr (requires --format synth)")
    run.add_argument("--loss", choices=sorted(LOSS_NAMES), default="exwlog")
    run.add_argument("--rules", type=int, default=5000)
    run.add_argument("--shrinkage", type=float, default=0.3)
    run.add_argument("--l2", type=float, default=1.0)
    run.add_argument("--bins", type=_parse_bins, default=None,
                     help="'none' (default), a fraction of the labels, an absolute count, "
                          "or 'singleton' (one bin per label; exact but through the binned path)")
    run.add_argument("--feature-sample", type=float, default=None,
                     help="fraction of attributes drawn per rule (default sqrt(A)/A)")
    run.add_argument("--no-bagging", action="store_true", help="disable bootstrap instance sampling")
    run.add_argument("--folds", type=int, default=10,
                     help="cross-validation folds; 1 trains on all data and evaluates on it")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--impute", choices=("none", "meanmode"), default="none")
    run.add_argument("--out", type=Path, help="write the JSON report here")
    run.add_argument("--model", type=Path, help="serialize the trained ensemble(s) here (JSON)")
    run.add_argument("--threads", type=int, default=1, help="worker threads across folds")

    cmp_cmd = sub.add_parser("compare", help="compare two run reports (speedup of B over A)")
    cmp_cmd.add_argument("report_a", type=Path)
    cmp_cmd.add_argument("report_b", type=Path)
    cmp_cmd.add_argument("--out", type=Path, help="write the comparison as JSON here")
    return parser


def _load_dataset(args, parser) -> tuple[data_io.Dataset, str]:
    fmt = args.format
    if fmt is None and args.data is not None:
        suffix = args.data.suffix.lower().lstrip(".")
        fmt = suffix if suffix in ("arff", "csv") else None
    if fmt == "synth" or (fmt is None and args.synth):
        if not args.synth:
            parser.error("--format synth requires --synth n,a,l,corr")
        try:
            n, a, l, corr = args.synth.split(",")
            dataset = data_io.synth_dataset(int(n), int(a), int(l), float(corr), args.seed)
        except ValueError as error:
            parser.error(f"bad --synth specification: {error}")
        return dataset, f"synth({args.synth})"
    if args.data is None:
        parser.error("--data is required unless --format synth is used")
    if fmt == "arff":
        if (args.labels is None) == (args.labels_xml is None):
            parser.error("arff input needs exactly one of --labels and --labels-xml")
        dataset = data_io.load_arff(args.data, label_count=args.labels,
                                    labels_xml=args.labels_xml, impute=args.impute)
    elif fmt == "csv":
        if (args.labels is None) == (args.label_prefix is None):
            parser.error("csv input needs exactly one of --labels and --label-prefix")
        dataset = data_io.load_csv(args.data, label_count=args.labels,
                                   label_prefix=args.label_prefix, impute=args.impute)
    else:
        parser.error(f"cannot infer the format of {args.data}; pass --format")
    return dataset, str(args.data)


def _train_config(args, fold_seed: int) -> TrainConfig:
    bin_config = None if args.bins is None else BinConfig(args.bins, args.l2)
    return TrainConfig(
        rule_count=args.rules,
        shrinkage=args.shrinkage,
        l2_weight=args.l2,
        bin_config=bin_config,
        feature_sample_fraction=args.feature_sample,
        instance_sampling=not args.no_bagging,
        seed=fold_seed,
        loss=LossFunction(LOSS_NAMES[args.loss]),
    )


def _run_fold(fold: int, train_set, test_set, args, fold_seed: int):
    ensemble, train_report = train(train_set, _train_config(args, fold_seed))
    predicted = discretize(predict_score_matrix(ensemble, test_set.features))
    result = metrics_mod.evaluate(test_set.labels, predicted)
    return FoldResult(
        fold=fold,
        metrics=result,
        total_train_seconds=train_report.total_train_seconds,
        candidate_eval_seconds=train_report.candidate_eval_seconds,
        rule_count=train_report.rule_count,
        candidates_evaluated=train_report.candidates_evaluated,
    ), ensemble


def _fold_seeds(seed: int, folds: int) -> tuple[int, list[int]]:
    children = np.random.SeedSequence(seed).spawn(folds + 1)
    split_seed = int(children[0].generate_state(1)[0])
    fold_seeds = [int(child.generate_state(1)[0]) for child in children[1:]]
    return split_seed, fold_seeds


def run_experiment(args, parser) -> int:
    dataset, source = _load_dataset(args, parser)
    if args.folds < 1:
        parser.error("--folds must be >= 1")
    split_seed, fold_seeds = _fold_seeds(args.seed, args.folds)
    if args.folds == 1:
        pairs = [(np.arange(dataset.example_count), np.arange(dataset.example_count))]
    else:
        pairs = data_io.kfold_split(dataset, args.folds, split_seed)
    jobs = [
        (fold, dataset.take(train_idx), dataset.take(test_idx), args, fold_seeds[fold])
        for fold, (train_idx, test_idx) in enumerate(pairs)
    ]
    if args.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            outcomes = list(pool.map(lambda job: _run_fold(*job), jobs))
    else:
        outcomes = [_run_fold(*job) for job in jobs]
    fold_results = [outcome[0] for outcome in outcomes]
    ensembles = [outcome[1] for outcome in outcomes]

    resolved_bins = None
    if args.bins is not None:
        resolved_bins = BinConfig(args.bins, args.l2).resolve_bin_count(dataset.label_count)
    report = RunReport(
        config={
            "loss": args.loss,
            "rules": args.rules,
            "shrinkage": args.shrinkage,
            "l2": args.l2,
            "bins": args.bins,
            "resolved_bin_count": resolved_bins,
            "feature_sample": args.feature_sample,
            "bagging": not args.no_bagging,
            "folds": args.folds,
            "seed": args.seed,
            "impute": args.impute,
            "threads": args.threads,
        },
        dataset={
            "source": source,
            "examples": dataset.example_count,
            "attributes": dataset.attribute_count,
            "labels": dataset.label_count,
        },
        folds=fold_results,
    )
    if args.out:
        args.out.write_text(report.to_json(), encoding="utf-8")
    if args.model:
        for fold, ensemble in enumerate(ensembles):
            path = args.model
            if len(ensembles) > 1:
                path = path.with_name(f"{path.stem}.fold{fold}{path.suffix}")
            path.write_text(ensemble_to_json(ensemble), encoding="utf-8")
    print(report.summary_table())
    return 0


def run_compare(args) -> int:
    report_a = RunReport.from_json(args.report_a.read_text(encoding="utf-8"))
    report_b = RunReport.from_json(args.report_b.read_text(encoding="utf-8"))
    comparison = compare_runs(report_a, report_b)
    if args.out:
        args.out.write_text(json.dumps(comparison, indent=2, sort_keys=True), encoding="utf-8")
    print(comparison_table(comparison))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args, parser)
        return run_compare(args)
    except (IncompatibleReports, ValueError, OSError, ArithmeticError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
