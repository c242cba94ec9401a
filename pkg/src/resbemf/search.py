"""Random hyperparameter search with cross-validation and Pareto extraction.

Candidates are sampled without replacement from a finite grid, scored by
k-fold cross-validation on the training partition with the grid-averaged
(coverage, 1 - MAE) objectives, and reduced to the Pareto front of
non-dominated configurations.  Everything derives deterministically from
one seed, independent of evaluation order or thread count.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .data import FoldAssignment, RatingsDataset, make_folds
from .metrics import ThresholdGrid, aggregate
from .model import Hyperparams, fit


class Objectives(NamedTuple):
    """One (coverage, 1 - MAE) objective pair; both are maximized."""

    coverage: float
    one_minus_mae: float


@dataclass(frozen=True)
class CandidateParams:
    """A hyperparameter combination drawn from the search grid."""

    k: int
    gamma: float
    eta: float
    m: int

    def with_seed(self, seed: int) -> Hyperparams:
        return Hyperparams(k=self.k, gamma=self.gamma, eta=self.eta, m=self.m, seed=seed)


@dataclass(frozen=True)
class SearchSpace:
    """Finite candidate grids per hyperparameter plus the sampled fraction."""

    k: tuple[int, ...]
    gamma: tuple[float, ...]
    eta: tuple[float, ...]
    m: tuple[int, ...]
    search_fraction: float = 1.0

    def __post_init__(self):
        for name in ("k", "gamma", "eta", "m"):
            grid = tuple(getattr(self, name))
            if not grid:
                raise ValueError(f"empty candidate list for {name}")
            object.__setattr__(self, name, grid)
        if not 0.0 < self.search_fraction <= 1.0:
            raise ValueError("search_fraction must lie in (0, 1]")
        if self.search_fraction * self.size < 1.0:
            raise ValueError("search_fraction times the grid size must be at least 1")

    @property
    def size(self) -> int:
        return len(self.k) * len(self.gamma) * len(self.eta) * len(self.m)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SearchSpace":
        """Build from a config document with lists per hyperparameter."""
        if not isinstance(doc, dict):
            raise ValueError("search space config must be a JSON object")
        known = {"k", "gamma", "eta", "m", "search_fraction"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown search space fields: {sorted(unknown)}")
        missing = {"k", "gamma", "eta", "m"} - set(doc)
        if missing:
            raise ValueError(f"search space config is missing: {sorted(missing)}")
        return cls(
            k=tuple(int(v) for v in doc["k"]),
            gamma=tuple(float(v) for v in doc["gamma"]),
            eta=tuple(float(v) for v in doc["eta"]),
            m=tuple(int(v) for v in doc["m"]),
            search_fraction=float(doc.get("search_fraction", 1.0)),
        )


@dataclass(frozen=True)
class EvaluatedCandidate:
    """A candidate with its per-fold and fold-averaged objectives.

    objectives is None (with an error message) when training failed on
    some fold; failed candidates never enter the Pareto front.
    """

    index: int
    params: CandidateParams
    per_fold: tuple[Objectives, ...]
    objectives: Optional[Objectives]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.objectives is None


@dataclass(frozen=True)
class SearchResult:
    candidates: tuple[EvaluatedCandidate, ...]
    front: tuple[EvaluatedCandidate, ...]


def derive_seed(*parts: int) -> int:
    """Stable integer seed derived from the given parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def sample_candidates(space: SearchSpace, seed: int) -> list[CandidateParams]:
    """Sample ceil(search_fraction * grid size) distinct grid points.

    Uniform without replacement, deterministic given the seed; a fraction
    of 1 yields the whole grid (in sampled order).
    """
    grid = list(itertools.product(space.k, space.gamma, space.eta, space.m))
    count = math.ceil(space.search_fraction * len(grid))
    chosen = np.random.default_rng(seed).permutation(len(grid))[:count]
    return [CandidateParams(*grid[j]) for j in chosen]


def cross_validate(
    params: CandidateParams,
    data: RatingsDataset,
    folds: FoldAssignment,
    grid: ThresholdGrid,
    *,
    fit_seed: int = 0,
    index: int = 0,
) -> EvaluatedCandidate:
    """Score one candidate: fit on each fold's complement, aggregate on the fold."""
    per_fold = []
    for j in range(folds.n_folds):
        model = fit(data, params.with_seed(fit_seed), rows=folds.rows_out(j))
        one_minus_mae, coverage = aggregate(model, data.triples(folds.rows_in(j)), grid)
        if one_minus_mae is None or coverage is None:
            raise RuntimeError(f"fold {j} produced no defined objective values")
        per_fold.append(Objectives(coverage=coverage, one_minus_mae=one_minus_mae))
    mean = Objectives(
        coverage=float(np.mean([f.coverage for f in per_fold])),
        one_minus_mae=float(np.mean([f.one_minus_mae for f in per_fold])),
    )
    return EvaluatedCandidate(index=index, params=params, per_fold=tuple(per_fold), objectives=mean)


def pareto_indices(points) -> np.ndarray:
    """Row indices of the non-dominated points of an (n, 2) array.

    Both columns are maximized; a point dominates another when it is >= in
    both coordinates and > in at least one, so exact duplicates never
    dominate each other and are all retained.  The result is ordered by
    the first column ascending.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (n, 2) array of objective pairs")
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    front: list[int] = []
    best = -np.inf
    i = 0
    while i < n:
        j = i
        x = pts[order[i], 0]
        while j < n and pts[order[j], 0] == x:
            j += 1
        group = order[i:j]
        group_max = pts[group, 1].max()
        if group_max > best:
            front.extend(int(g) for g in group if pts[g, 1] == group_max)
            best = group_max
        i = j
    front_arr = np.asarray(front, dtype=np.intp)
    return front_arr[np.argsort(pts[front_arr, 0], kind="stable")]


def pareto_front(candidates: Sequence[EvaluatedCandidate]) -> list[EvaluatedCandidate]:
    """Non-dominated evaluated candidates, ordered by coverage ascending."""
    scored = [c for c in candidates if not c.failed]
    if not scored:
        return []
    pairs = np.array([[c.objectives.coverage, c.objectives.one_minus_mae] for c in scored])
    return [scored[j] for j in pareto_indices(pairs)]


def random_search(
    space: SearchSpace,
    data: RatingsDataset,
    n_folds: int,
    grid: ThresholdGrid,
    seed: int,
    *,
    threads: int = 1,
) -> SearchResult:
    """Sample the space, cross-validate every candidate, extract the front.

    Sampling, fold assignment and per-candidate fit seeds all derive from
    the single seed, so the result is independent of evaluation order and
    thread count.  A candidate whose training fails is recorded with its
    error and skipped by the front; only an all-failed search is an error.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    params = sample_candidates(space, derive_seed(seed, 1))
    folds = make_folds(data, n_folds, derive_seed(seed, 2))

    def evaluate(item: tuple[int, CandidateParams]) -> EvaluatedCandidate:
        idx, p = item
        try:
            return cross_validate(p, data, folds, grid, fit_seed=derive_seed(seed, 3, idx), index=idx)
        except Exception as e:  # noqa: BLE001 - a bad candidate must not kill the search
            return EvaluatedCandidate(index=idx, params=p, per_fold=(), objectives=None, error=str(e))

    items = list(enumerate(params))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            candidates = list(pool.map(evaluate, items))
    else:
        candidates = [evaluate(item) for item in items]

    if all(c.failed for c in candidates):
        raise RuntimeError(f"every candidate failed; first error: {candidates[0].error}")
    return SearchResult(candidates=tuple(candidates), front=tuple(pareto_front(candidates)))


def write_candidates_csv(result: SearchResult, n_folds: int, target) -> None:
    """One row per evaluated candidate: hyperparameters, per-fold and mean
    objectives, front membership flag and error message if any."""
    front_ids = {c.index for c in result.front}
    header = ["candidate", "k", "gamma", "eta", "m"]
    header += [f"coverage_fold{j}" for j in range(n_folds)]
    header += [f"one_minus_mae_fold{j}" for j in range(n_folds)]
    header += ["coverage", "one_minus_mae", "on_front", "error"]

    def fmt(v: Optional[float]) -> str:
        return "" if v is None else f"{v:.6f}"

    with _sink(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for c in result.candidates:
            per_fold_cov = [fmt(f.coverage) for f in c.per_fold] + [""] * (n_folds - len(c.per_fold))
            per_fold_omm = [fmt(f.one_minus_mae) for f in c.per_fold] + [""] * (n_folds - len(c.per_fold))
            writer.writerow(
                [c.index, c.params.k, repr(c.params.gamma), repr(c.params.eta), c.params.m]
                + per_fold_cov
                + per_fold_omm
                + [
                    fmt(None if c.failed else c.objectives.coverage),
                    fmt(None if c.failed else c.objectives.one_minus_mae),
                    int(c.index in front_ids),
                    c.error or "",
                ]
            )


def write_front_csv(result: SearchResult, target) -> None:
    """Front members only, ordered by coverage ascending."""
    with _sink(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["candidate", "k", "gamma", "eta", "m", "coverage", "one_minus_mae"])
        for c in result.front:
            writer.writerow(
                [
                    c.index,
                    c.params.k,
                    repr(c.params.gamma),
                    repr(c.params.eta),
                    c.params.m,
                    f"{c.objectives.coverage:.6f}",
                    f"{c.objectives.one_minus_mae:.6f}",
                ]
            )


class _sink:
    def __init__(self, target):
        self.target = target
        self._fh = None

    def __enter__(self):
        if isinstance(self.target, (str, Path)):
            self._fh = open(self.target, "w", encoding="utf-8", newline="")
            return self._fh
        return self.target

    def __exit__(self, *exc):
        if self._fh is not None:
            self._fh.close()
        return False
