"""Reliability-aware classification-based collaborative filtering.

A rating is modelled as a draw from a per-pair probability distribution
over the discrete score set, parameterized by per-score latent factors.
The package bundles the model, dataset handling, reliability-thresholded
evaluation metrics, a PMF baseline, and a multi-objective random
hyperparameter search with Pareto-front extraction, all reproducible from
explicit seeds.
"""

from .data import (
    DatasetStats,
    FoldAssignment,
    RatingFormat,
    RatingsDataset,
    Triples,
    make_folds,
    parse_ratings,
    split,
    stats,
    write_partition_csv,
    write_ratings,
)
from .errors import ColdStartError, ParseError, TrainingDivergedError
from .metrics import (
    EvaluationReport,
    PredictionRows,
    ThresholdGrid,
    accuracy_at,
    aggregate,
    coverage_at,
    evaluate_model,
    mae_at,
    map_at,
    prediction_rows,
    ranking_key,
    write_report_csv,
)
from .model import (
    FactorModel,
    Hyperparams,
    PredictionDistribution,
    fit,
    log_likelihood,
    rating_gradient,
    softmax,
)
from .persistence import load_model, save_model
from .pmf import PmfModel, pmf_fit, pmf_loss, pmf_loss_gradient, pmf_predict
from .scores import ScoreSet
from .search import (
    CandidateParams,
    EvaluatedCandidate,
    Objectives,
    SearchResult,
    SearchSpace,
    cross_validate,
    pareto_front,
    pareto_indices,
    random_search,
    sample_candidates,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateParams",
    "ColdStartError",
    "DatasetStats",
    "EvaluatedCandidate",
    "EvaluationReport",
    "FactorModel",
    "FoldAssignment",
    "Hyperparams",
    "Objectives",
    "ParseError",
    "PmfModel",
    "PredictionDistribution",
    "PredictionRows",
    "RatingFormat",
    "RatingsDataset",
    "ScoreSet",
    "SearchResult",
    "SearchSpace",
    "ThresholdGrid",
    "TrainingDivergedError",
    "Triples",
    "accuracy_at",
    "aggregate",
    "coverage_at",
    "cross_validate",
    "evaluate_model",
    "fit",
    "load_model",
    "log_likelihood",
    "mae_at",
    "make_folds",
    "map_at",
    "pareto_front",
    "pareto_indices",
    "parse_ratings",
    "pmf_fit",
    "pmf_loss",
    "pmf_loss_gradient",
    "pmf_predict",
    "prediction_rows",
    "random_search",
    "ranking_key",
    "rating_gradient",
    "sample_candidates",
    "save_model",
    "softmax",
    "split",
    "stats",
    "write_partition_csv",
    "write_ratings",
    "write_report_csv",
]
