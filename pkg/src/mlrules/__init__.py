"""Multi-label gradient-boosted rule ensembles with dynamic label binning."""

from .binning import (
    AggregatedStats,
    BinConfig,
    BinMapping,
    ZERO_BIN,
    aggregate_stats,
    expand_head,
    label_criteria,
    map_to_bins,
)
from .data import Dataset, dataset_from_arrays, kfold_split, load_arff, load_csv, synth_dataset
from .induction import Evaluation, TrainConfig, TrainReport, evaluate_candidate, refine_rule, train
from .linalg import PackedSymmetric, SingularSystem, dot, solve_symmetric, sym_mat_vec
from .losses import (
    EXAMPLE_WISE_LOGISTIC,
    LABEL_WISE_LOGISTIC,
    ExampleStats,
    LossFunction,
    batch_stats,
    example_stats,
    loss_value,
)
from .metrics import EvalResult, evaluate, hamming, subset_zero_one
from .report import RunReport, compare_runs
from .rules import Condition, Ensemble, Rule, covers, discretize, predict_score_matrix, predict_scores
from .stats import StatSum, add_example, subtract_from_total

__version__ = "0.1.0"
