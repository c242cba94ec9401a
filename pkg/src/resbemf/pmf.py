"""Regularized squared-error matrix factorization baseline.

A plain one-vector-per-entity factorization trained by per-rating SGD on
the L2-penalized squared prediction error.  Predictions are dot products
clamped to the score range; the baseline never withholds a prediction, so
its reliability is the constant 1 and its coverage is 1 at every
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import TrainingDivergedError
from .model import Hyperparams, _lookup_rows
from .scores import ScoreSet


@dataclass
class PmfModel:
    """Trained baseline factors: P is (n_users, k), Q is (n_items, k)."""

    score_set: ScoreSet
    P: np.ndarray
    Q: np.ndarray
    hyperparams: Hyperparams
    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    _user_rows: dict = field(init=False, repr=False)
    _item_rows: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.user_ids = tuple(self.user_ids)
        self.item_ids = tuple(self.item_ids)
        self.P = np.array(self.P, dtype=np.float64, order="C")
        self.Q = np.array(self.Q, dtype=np.float64, order="C")
        k = self.hyperparams.k
        if self.P.shape != (len(self.user_ids), k):
            raise ValueError(f"P has shape {self.P.shape}, expected {(len(self.user_ids), k)}")
        if self.Q.shape != (len(self.item_ids), k):
            raise ValueError(f"Q has shape {self.Q.shape}, expected {(len(self.item_ids), k)}")
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.Q))):
            raise ValueError("factor matrices must be finite")
        self.P.setflags(write=False)
        self.Q.setflags(write=False)
        self._user_rows = {u: r for r, u in enumerate(self.user_ids)}
        self._item_rows = {i: r for r, i in enumerate(self.item_ids)}

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def user_row(self, user) -> int:
        return int(_lookup_rows(self._user_rows, [user], None, "user")[0])

    def item_row(self, item) -> int:
        return int(_lookup_rows(self._item_rows, [item], None, "item")[0])

    def user_rows(self, users, missing: Optional[int] = None) -> np.ndarray:
        return _lookup_rows(self._user_rows, users, missing, "user")

    def item_rows(self, items, missing: Optional[int] = None) -> np.ndarray:
        return _lookup_rows(self._item_rows, items, missing, "item")

    def predict(self, user, item) -> float:
        """Dot-product prediction clamped to [min score, max score]."""
        raw = float(self.P[self.user_row(user)] @ self.Q[self.item_row(item)])
        return float(np.clip(raw, self.score_set.min, self.score_set.max))

    def nearest_score(self, value: float) -> float:
        """The score value closest to `value`; exact midpoints round up."""
        return float(_nearest_scores(np.asarray([value]), self.score_set)[0])

    def prediction_columns(self, rows_u: np.ndarray, rows_i: np.ndarray):
        """Evaluation columns: clamped estimate, nearest-score label,
        constant reliability 1, and the estimate again as ranking tie value."""
        raw = np.einsum("nf,nf->n", self.P[rows_u], self.Q[rows_i])
        est = np.clip(raw, self.score_set.min, self.score_set.max)
        label = _nearest_scores(est, self.score_set)
        return est, label, np.ones(len(est)), est.copy()

    def default_prediction_columns(self):
        """Cold pairs behave as zero factor vectors: clamp(0), reliability 1."""
        est = float(np.clip(0.0, self.score_set.min, self.score_set.max))
        return est, float(_nearest_scores(np.asarray([est]), self.score_set)[0]), 1.0, est


def _nearest_scores(values: np.ndarray, score_set: ScoreSet) -> np.ndarray:
    """Map each value to the nearest score value, ties toward the larger score."""
    table = np.asarray(score_set.values)
    midpoints = (table[:-1] + table[1:]) / 2.0
    idx = np.searchsorted(midpoints, values, side="right")
    return table[idx]


def pmf_fit(data, hp: Hyperparams, *, rows: Optional[np.ndarray] = None) -> PmfModel:
    """Train the baseline by per-rating stochastic gradient descent.

    Factors start from seeded N(0, 0.1) noise; each of the hp.m epochs
    visits the training ratings in a freshly shuffled order (same
    generator), applying the standard update
        P_u += eta * (e * Q_i - gamma * P_u),  e = r - P_u . Q_i
    and symmetrically for Q_i.  Deterministic given hp.seed.
    """
    if rows is None:
        rows = data.train_rows()
    rows = np.asarray(rows, dtype=np.intp)
    if rows.size == 0:
        raise ValueError("training partition is empty")
    uids = data.users[rows]
    iids = data.items[rows]
    vals = data.values[rows]

    rng = np.random.default_rng(hp.seed)
    P = 0.1 * rng.standard_normal((data.n_users, hp.k))
    Q = 0.1 * rng.standard_normal((data.n_items, hp.k))

    eta, gamma = hp.eta, hp.gamma
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, hp.m + 1):
            for t in rng.permutation(len(rows)):
                u, i = uids[t], iids[t]
                pu = P[u].copy()
                e = vals[t] - pu @ Q[i]
                P[u] += eta * (e * Q[i] - gamma * pu)
                Q[i] += eta * (e * pu - gamma * Q[i])
            if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
                raise TrainingDivergedError(f"non-finite factors after epoch {epoch}")

    return PmfModel(
        score_set=data.score_set,
        P=P,
        Q=Q,
        hyperparams=hp,
        user_ids=data.user_ids,
        item_ids=data.item_ids,
    )


def pmf_predict(model: PmfModel, user, item) -> float:
    """Clamped dot-product prediction for one (user, item) pair."""
    return model.predict(user, item)


def pmf_loss(model: PmfModel, ratings: Iterable) -> float:
    """Training objective: sum of squared errors plus gamma * (|P|^2 + |Q|^2)."""
    total = 0.0
    rows = list(ratings)
    if rows:
        users, items, values = zip(*rows)
        ru = model.user_rows(users)
        ri = model.item_rows(items)
        err = np.asarray(values, dtype=np.float64) - np.einsum("nf,nf->n", model.P[ru], model.Q[ri])
        total = float(err @ err)
    return total + model.hyperparams.gamma * (float(np.sum(model.P * model.P)) + float(np.sum(model.Q * model.Q)))


def pmf_loss_gradient(model: PmfModel, ratings: Iterable):
    """Analytic gradient of pmf_loss with respect to P and Q."""
    grad_p = 2.0 * model.hyperparams.gamma * model.P.copy()
    grad_q = 2.0 * model.hyperparams.gamma * model.Q.copy()
    rows = list(ratings)
    if rows:
        users, items, values = zip(*rows)
        ru = model.user_rows(users)
        ri = model.item_rows(items)
        err = np.asarray(values, dtype=np.float64) - np.einsum("nf,nf->n", model.P[ru], model.Q[ri])
        np.add.at(grad_p, ru, -2.0 * err[:, None] * model.Q[ri])
        np.add.at(grad_q, ri, -2.0 * err[:, None] * model.P[ru])
    return grad_p, grad_q
