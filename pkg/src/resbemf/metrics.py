"""Reliability-parameterized prediction metrics and ranking quality.

All error metrics filter the test predictions by a reliability threshold
theta and average per user first: users whose filtered set is empty drop
out of the outer mean, and a metric whose outer mean has no users at all
is reported as absent (None).  MAE is normalized by the score range so
every metric lives in [0, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Triples
from .model import PredictionDistribution
from .scores import ScoreSet


@dataclass(frozen=True)
class ThresholdGrid:
    """Equidistant reliability thresholds 0 = t_0 < ... < t_{N-1} = 1."""

    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("a threshold grid needs at least 2 points")

    @property
    def thetas(self) -> tuple[float, ...]:
        n = self.n_points
        return tuple(k / (n - 1) for k in range(n))


@dataclass(frozen=True)
class PredictionRows:
    """Per test-pair prediction columns prepared for metric evaluation.

    user_group assigns each row a dense group index over the users present
    in the evaluated triples; item_order carries the model's item row (or
    -1 for cold items) used as the deterministic last ranking tie-break.
    """

    user_group: np.ndarray
    n_users: int
    item_order: np.ndarray
    actual: np.ndarray
    estimate: np.ndarray
    label: np.ndarray
    reliability: np.ndarray
    tie_mean: np.ndarray
    n_cold: int = 0

    def __len__(self) -> int:
        return len(self.actual)


def prediction_rows(model, test: Triples, *, on_cold: str = "raise") -> PredictionRows:
    """Compute the prediction columns of a model for a set of test triples.

    on_cold="raise" propagates unknown identifiers as ColdStartError;
    on_cold="default" substitutes the model's no-information prediction
    and counts the affected pairs in n_cold.
    """
    if on_cold not in ("raise", "default"):
        raise ValueError("on_cold must be 'raise' or 'default'")
    lenient = on_cold == "default"
    rows_u = model.user_rows(test.users, missing=-1 if lenient else None)
    rows_i = model.item_rows(test.items, missing=-1 if lenient else None)
    cold = (rows_u < 0) | (rows_i < 0)
    n = len(test)

    estimate = np.empty(n)
    label = np.empty(n)
    reliability = np.empty(n)
    tie_mean = np.empty(n)
    warm = ~cold
    est_w, lab_w, rel_w, tie_w = model.prediction_columns(rows_u[warm], rows_i[warm])
    estimate[warm], label[warm], reliability[warm], tie_mean[warm] = est_w, lab_w, rel_w, tie_w
    if cold.any():
        estimate[cold], label[cold], reliability[cold], tie_mean[cold] = model.default_prediction_columns()

    _, user_group = np.unique(np.asarray(test.users, dtype=object), return_inverse=True)
    return PredictionRows(
        user_group=user_group,
        n_users=int(user_group.max()) + 1 if n else 0,
        item_order=rows_i,
        actual=np.asarray(test.values, dtype=np.float64),
        estimate=estimate,
        label=label,
        reliability=reliability,
        tie_mean=tie_mean,
        n_cold=int(cold.sum()),
    )


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")


def _per_user_mean(rows: PredictionRows, per_row: np.ndarray, theta: float) -> Optional[float]:
    """Mean over users of the per-user mean of per_row on the filtered set."""
    keep = rows.reliability >= theta
    counts = np.bincount(rows.user_group[keep], minlength=rows.n_users)
    sums = np.bincount(rows.user_group[keep], weights=per_row[keep], minlength=rows.n_users)
    present = counts > 0
    if not present.any():
        return None
    return float(np.mean(sums[present] / counts[present]))


def mae_at(model, test: Triples, theta: float, *, rows: Optional[PredictionRows] = None) -> Optional[float]:
    """Normalized mean absolute error of the predictions with reliability >= theta.

    Per-user mean of |actual - estimate| / (max score - min score), then
    mean over the users keeping at least one prediction; None when every
    user is filtered out.
    """
    _check_theta(theta)
    rows = rows if rows is not None else prediction_rows(model, test)
    err = np.abs(rows.actual - rows.estimate) / model.score_set.width
    return _per_user_mean(rows, err, theta)


def accuracy_at(model, test: Triples, theta: float, *, rows: Optional[PredictionRows] = None) -> Optional[float]:
    """Fraction of exact score matches among predictions with reliability >= theta,
    averaged per user first; None when every user is filtered out."""
    _check_theta(theta)
    rows = rows if rows is not None else prediction_rows(model, test)
    hit = (rows.label == rows.actual).astype(np.float64)
    return _per_user_mean(rows, hit, theta)


def coverage_at(model, test: Triples, theta: float, *, rows: Optional[PredictionRows] = None) -> Optional[float]:
    """Mean over users of the fraction of their test ratings predicted at theta."""
    _check_theta(theta)
    rows = rows if rows is not None else prediction_rows(model, test)
    if rows.n_users == 0:
        return None
    totals = np.bincount(rows.user_group, minlength=rows.n_users)
    kept = np.bincount(rows.user_group[rows.reliability >= theta], minlength=rows.n_users)
    return float(np.mean(kept / totals))


def n_predicted_at(rows: PredictionRows, theta: float) -> int:
    """Number of test pairs whose reliability reaches theta."""
    return int(np.count_nonzero(rows.reliability >= theta))


def ranking_key(dist: PredictionDistribution, score_set: ScoreSet) -> tuple[float, float]:
    """Recommendation sort key of a distribution: (mode score, mean score).

    Items are ranked by descending key; residual ties are broken by item
    order, which keeps the ranking deterministic.
    """
    return (score_set.value(dist.mode_index), dist.mean)


def map_at(
    model,
    test: Triples,
    tau: float,
    n_top: int,
    theta: float,
    *,
    rows: Optional[PredictionRows] = None,
) -> Optional[float]:
    """Mean average precision of per-user top-N recommendation lists.

    Each user's test items with reliability >= theta are ranked by
    descending (label, tie_mean) with item order as the last tie-break;
    an item is relevant when its actual rating is >= tau.  The average
    precision uses the precision at each rank and is 0 for a user whose
    top list contains no relevant item.  Users without any rankable item
    are excluded; None when no user has one.
    """
    _check_theta(theta)
    if n_top < 1:
        raise ValueError("n_top must be at least 1")
    if not model.score_set.min <= tau <= model.score_set.max:
        raise ValueError("tau must lie within the score range")
    rows = rows if rows is not None else prediction_rows(model, test)

    keep = np.flatnonzero(rows.reliability >= theta)
    if len(keep) == 0:
        return None
    # global sort once: user group, then descending key, then item order
    order = keep[
        np.lexsort(
            (
                rows.item_order[keep],
                -rows.tie_mean[keep],
                -rows.label[keep],
                rows.user_group[keep],
            )
        )
    ]
    groups = rows.user_group[order]
    starts = np.flatnonzero(np.r_[True, groups[1:] != groups[:-1]])
    ends = np.r_[starts[1:], len(order)]

    ap_values = []
    for s, e in zip(starts, ends):
        top = order[s:min(e, s + n_top)]
        rel = rows.actual[top] >= tau
        n_rel = int(rel.sum())
        if n_rel == 0:
            ap_values.append(0.0)
            continue
        precision_at_k = np.cumsum(rel) / np.arange(1, len(top) + 1)
        ap_values.append(float(precision_at_k[rel].sum() / n_rel))
    return float(np.mean(ap_values))


def aggregate(
    model,
    test: Triples,
    grid: ThresholdGrid,
    *,
    rows: Optional[PredictionRows] = None,
) -> tuple[Optional[float], Optional[float]]:
    """Grid-averaged objectives (1 - MAE, coverage).

    Plain arithmetic means over the grid points; grid points where MAE is
    undefined (no prediction anywhere) carry the last defined value
    forward.  Both entries are None only for an empty test set.
    """
    rows = rows if rows is not None else prediction_rows(model, test)
    if len(rows) == 0:
        return None, None
    one_minus_mae = []
    coverage = []
    for theta in grid.thetas:
        mae = mae_at(model, test, theta, rows=rows)
        one_minus_mae.append(None if mae is None else 1.0 - mae)
        coverage.append(coverage_at(model, test, theta, rows=rows))
    if all(v is None for v in one_minus_mae):
        return None, float(np.mean(coverage))
    filled: list[Optional[float]] = []
    last: Optional[float] = None
    for v in one_minus_mae:
        if v is not None:
            last = v
        filled.append(last)
    if filled[0] is None:  # leading gap: backfill from the first defined point
        first = next(v for v in filled if v is not None)
        filled = [first if v is None else v for v in filled]
    return float(np.mean(filled)), float(np.mean(coverage))


@dataclass(frozen=True)
class ThresholdRow:
    theta: float
    mae: Optional[float]
    accuracy: Optional[float]
    coverage: float
    n_predicted: int


@dataclass(frozen=True)
class EvaluationReport:
    """Per-threshold metric rows plus the aggregate and ranking summaries."""

    rows: tuple[ThresholdRow, ...]
    one_minus_mae: float
    coverage: float
    map_score: Optional[float]
    n_top: int
    relevance_threshold: float
    map_theta: float
    n_test: int
    n_cold: int


def evaluate_model(
    model,
    test: Triples,
    grid: ThresholdGrid,
    *,
    n_top: int = 10,
    tau: Optional[float] = None,
    map_theta: float = 0.0,
    on_cold: str = "raise",
) -> EvaluationReport:
    """Evaluate a model over the whole threshold grid.

    tau defaults to the midpoint of the score range.  The prediction
    columns are computed once and shared by every metric.
    """
    if len(test) == 0:
        raise ValueError("empty test partition")
    if tau is None:
        tau = (model.score_set.min + model.score_set.max) / 2.0
    rows = prediction_rows(model, test, on_cold=on_cold)
    per_theta = tuple(
        ThresholdRow(
            theta=theta,
            mae=mae_at(model, test, theta, rows=rows),
            accuracy=accuracy_at(model, test, theta, rows=rows),
            coverage=coverage_at(model, test, theta, rows=rows),
            n_predicted=n_predicted_at(rows, theta),
        )
        for theta in grid.thetas
    )
    one_minus_mae, coverage = aggregate(model, test, grid, rows=rows)
    return EvaluationReport(
        rows=per_theta,
        one_minus_mae=one_minus_mae,
        coverage=coverage,
        map_score=map_at(model, test, tau, n_top, map_theta, rows=rows),
        n_top=n_top,
        relevance_threshold=tau,
        map_theta=map_theta,
        n_test=len(test),
        n_cold=rows.n_cold,
    )


def write_report_csv(report: EvaluationReport, target) -> None:
    """Write the per-threshold rows as CSV; absent metrics become empty cells."""

    def cell(v) -> str:
        return "" if v is None else f"{v:.6f}"

    close = False
    if isinstance(target, (str, Path)):
        fh = open(target, "w", encoding="utf-8", newline="")
        close = True
    else:
        fh = target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "mae", "accuracy", "coverage", "n_predicted"])
        for row in report.rows:
            writer.writerow([f"{row.theta:.6f}", cell(row.mae), cell(row.accuracy), cell(row.coverage), row.n_predicted])
    finally:
        if close:
            fh.close()


def report_summary(report: EvaluationReport) -> dict:
    """JSON-ready aggregate and ranking summary of a report."""
    return {
        "one_minus_mae": report.one_minus_mae,
        "coverage": report.coverage,
        "map": report.map_score,
        "n_top": report.n_top,
        "relevance_threshold": report.relevance_threshold,
        "map_theta": report.map_theta,
        "grid_n": len(report.rows),
        "n_test": report.n_test,
        "n_cold_pairs": report.n_cold,
    }
