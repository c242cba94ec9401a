"""Softmax-over-scores matrix factorization with reliability-aware prediction.

Every user u and item i carries one length-k latent vector per score s.
The d per-score dot products P_u^s . Q_i^s are turned into a probability
distribution over the score set by a softmax; the predicted rating is the
distribution's mode and the probability mass at the mode is the
prediction's reliability.  Training maximizes the L2-penalized
log-likelihood of the observed ratings by semi-batch gradient ascent: each
epoch first updates all user factors against frozen item factors, then all
item factors against the updated, frozen user factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import ColdStartError, TrainingDivergedError
from .scores import ScoreSet


def softmax(x) -> np.ndarray:
    """Numerically stable softmax of a 1-D vector (max-shifted)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("softmax expects a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax input must be finite")
    e = np.exp(x - x.max())
    return e / e.sum()


def _row_softmax(dots: np.ndarray) -> np.ndarray:
    e = np.exp(dots - dots.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class Hyperparams:
    """Training hyperparameters.

    k: latent dimensionality, gamma: L2 weight, eta: learning rate,
    m: number of epochs, seed: factor-initialization seed.
    """

    k: int
    gamma: float
    eta: float
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.m < 1:
            raise ValueError("m must be a positive integer")


@dataclass(frozen=True)
class PredictionDistribution:
    """Probability vector over the score set with its derived summary.

    mode_index is the smallest index attaining the maximum probability,
    reliability the mass at the mode, mean the probability-weighted mean
    score value.
    """

    probs: np.ndarray
    mode_index: int
    reliability: float
    mean: float


def _distribution(probs: np.ndarray, score_set: ScoreSet) -> PredictionDistribution:
    mode = int(np.argmax(probs))
    probs = np.array(probs, dtype=np.float64)
    probs.setflags(write=False)
    return PredictionDistribution(
        probs=probs,
        mode_index=mode,
        reliability=float(probs[mode]),
        mean=float(probs @ np.asarray(score_set.values)),
    )


@dataclass
class FactorModel:
    """Trained factor tensors of the softmax-over-scores model.

    P has shape (n_users, d, k) and Q has shape (n_items, d, k), indexed
    by the row of the external identifier in user_ids / item_ids.  A model
    is immutable once constructed; the factor arrays are marked read-only
    and prediction is safe for concurrent readers.
    """

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
        d, k = self.score_set.d, self.hyperparams.k
        self.P = np.array(self.P, dtype=np.float64, order="C")
        self.Q = np.array(self.Q, dtype=np.float64, order="C")
        if self.P.shape != (len(self.user_ids), d, k):
            raise ValueError(f"P has shape {self.P.shape}, expected {(len(self.user_ids), d, k)}")
        if self.Q.shape != (len(self.item_ids), d, k):
            raise ValueError(f"Q has shape {self.Q.shape}, expected {(len(self.item_ids), d, k)}")
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.Q))):
            raise ValueError("factor tensors must be finite")
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

    # -- identifier lookup ------------------------------------------------

    def user_row(self, user) -> int:
        try:
            return self._user_rows[user]
        except KeyError:
            raise ColdStartError(f"unknown user {user!r}") from None

    def item_row(self, item) -> int:
        try:
            return self._item_rows[item]
        except KeyError:
            raise ColdStartError(f"unknown item {item!r}") from None

    def user_rows(self, users, missing: Optional[int] = None) -> np.ndarray:
        """Batch id -> row lookup; unknown ids raise unless a fill value is given."""
        return _lookup_rows(self._user_rows, users, missing, "user")

    def item_rows(self, items, missing: Optional[int] = None) -> np.ndarray:
        return _lookup_rows(self._item_rows, items, missing, "item")

    # -- prediction --------------------------------------------------------

    def predict_distribution(self, user, item) -> PredictionDistribution:
        """Probability distribution over the score set for one (user, item)."""
        u, i = self.user_row(user), self.item_row(item)
        dots = np.einsum("sf,sf->s", self.P[u], self.Q[i])
        return _distribution(softmax(dots), self.score_set)

    def predict(self, user, item, theta: float):
        """Mode-criterion prediction filtered by the reliability threshold.

        Returns (score value, reliability) when the reliability reaches
        theta, and None when the prediction is withheld.
        """
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        dist = self.predict_distribution(user, item)
        if dist.reliability >= theta:
            return self.score_set.value(dist.mode_index), dist.reliability
        return None

    def prediction_columns(self, rows_u: np.ndarray, rows_i: np.ndarray):
        """Vectorized prediction columns for parallel row-index arrays.

        Returns (estimate, label, reliability, tie_mean).  The regression
        estimate and the class label coincide for this model: both are the
        mode score value.  tie_mean is the probability-weighted mean score
        used to break ranking ties.
        """
        dots = np.einsum("nsf,nsf->ns", self.P[rows_u], self.Q[rows_i])
        probs = _row_softmax(dots) if len(dots) else np.zeros((0, self.score_set.d))
        mode = probs.argmax(axis=1) if len(probs) else np.zeros(0, dtype=np.intp)
        rel = probs[np.arange(len(mode)), mode]
        vals = np.asarray(self.score_set.values)
        est = vals[mode]
        return est, est.copy(), rel, probs @ vals

    def default_prediction_columns(self):
        """Prediction columns for a cold (unknown user or item) pair.

        Matches the uniform distribution: mode at the smallest score,
        reliability 1/d, mean score as tie-break value.
        """
        vals = self.score_set.values
        return vals[0], vals[0], 1.0 / self.score_set.d, sum(vals) / len(vals)


def _lookup_rows(table: dict, keys, missing: Optional[int], kind: str) -> np.ndarray:
    rows = np.empty(len(keys), dtype=np.intp)
    if missing is None:
        for j, key in enumerate(keys):
            try:
                rows[j] = table[key]
            except KeyError:
                raise ColdStartError(f"unknown {kind} {key!r}") from None
    else:
        get = table.get
        for j, key in enumerate(keys):
            rows[j] = get(key, missing)
    return rows


def log_likelihood(model: FactorModel, ratings: Iterable) -> float:
    """Penalized log-likelihood of the given (user, item, rating) triples.

    Sum over the triples of log p(rating) under the model's per-pair
    distribution; when gamma > 0 the L2 penalty gamma/2 * (|P|^2 + |Q|^2)
    over all factor entries is subtracted once.
    """
    triples = list(ratings)
    total = 0.0
    if triples:
        users, items, values = zip(*triples)
        rows_u = model.user_rows(users)
        rows_i = model.item_rows(items)
        ridx = model.score_set.indices(values)
        dots = np.einsum("nsf,nsf->ns", model.P[rows_u], model.Q[rows_i])
        shifted = dots - dots.max(axis=1, keepdims=True)
        logprob = shifted[np.arange(len(ridx)), ridx] - np.log(np.exp(shifted).sum(axis=1))
        total = float(logprob.sum())
    gamma = model.hyperparams.gamma
    if gamma > 0.0:
        total -= 0.5 * gamma * (float(np.sum(model.P * model.P)) + float(np.sum(model.Q * model.Q)))
    return total


def rating_gradient(model: FactorModel, user, item, rating):
    """Gradient of one rating's penalized log-likelihood term.

    Returns (grad_P_u, grad_Q_i), both (d, k).  For every score channel s
    the likelihood part is (1{s == rating} - p(s)) times the opposite
    side's factor vector; the L2 part subtracts gamma times the parameter
    itself, contributed once per observed rating, which is exactly what
    the trainer accumulates.
    """
    u, i = model.user_row(user), model.item_row(item)
    r = model.score_set.index(rating)
    Pu, Qi = model.P[u], model.Q[i]
    coeff = -softmax(np.einsum("sf,sf->s", Pu, Qi))
    coeff[r] += 1.0
    gamma = model.hyperparams.gamma
    grad_p = coeff[:, None] * Qi - gamma * Pu
    grad_q = coeff[:, None] * Pu - gamma * Qi
    return grad_p, grad_q


def fit(
    data,
    hp: Hyperparams,
    *,
    rows: Optional[np.ndarray] = None,
    on_epoch: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
) -> FactorModel:
    """Train a factor model on a dataset's training ratings.

    Factors are initialized entrywise from U(0, 1) by a generator seeded
    with hp.seed.  Every user and item of the dataset receives factor rows
    even when it has no training rating; untouched rows keep their initial
    values, so the model can always issue a (low-information) distribution
    for any pair of the dataset.

    Each of the hp.m epochs runs two semi-batch phases: user factors are
    updated from the accumulated gradients of their ratings against frozen
    item factors, then item factors symmetrically against the updated,
    frozen user factors.  Updates ascend the penalized log-likelihood; the
    L2 term is accumulated once per observed rating, so the effective
    penalty on a profile grows with its size.

    rows restricts training to the given dataset row indices (defaults to
    the train partition).  on_epoch(epoch, P, Q) is called with epoch 0
    right after initialization and once after every epoch; the arrays are
    live views and must not be mutated.
    """
    if rows is None:
        rows = data.train_rows()
    rows = np.asarray(rows, dtype=np.intp)
    if rows.size == 0:
        raise ValueError("training partition is empty")
    score_set = data.score_set
    d, k = score_set.d, hp.k
    uids = data.users[rows]
    iids = data.items[rows]
    ridx = score_set.indices(data.values[rows])

    rng = np.random.default_rng(hp.seed)
    P = rng.random((data.n_users, d, k))
    Q = rng.random((data.n_items, d, k))

    # per-entity rating counts drive the per-rating L2 accumulation
    cnt_u = np.bincount(uids, minlength=data.n_users).astype(np.float64)
    cnt_i = np.bincount(iids, minlength=data.n_items).astype(np.float64)
    order_u = np.argsort(uids, kind="stable")
    order_i = np.argsort(iids, kind="stable")

    if on_epoch is not None:
        on_epoch(0, P, Q)
    # overflow is detected by the per-epoch finite check and reported as an
    # error, so numpy's intermediate warnings are noise here
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, hp.m + 1):
            _phase(P, Q, uids, iids, ridx, order_u, cnt_u, hp)
            _phase(Q, P, iids, uids, ridx, order_i, cnt_i, hp)
            if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
                raise TrainingDivergedError(f"non-finite factors after epoch {epoch}")
            if on_epoch is not None:
                on_epoch(epoch, P, Q)

    return FactorModel(
        score_set=score_set,
        P=P,
        Q=Q,
        hyperparams=hp,
        user_ids=data.user_ids,
        item_ids=data.item_ids,
    )


def _phase(target, other, t_rows, o_rows, ridx, order, counts, hp: Hyperparams) -> int:
    """One semi-batch half-epoch updating `target` in place.

    Accumulates every rating's gradient for the target side against the
    frozen other side, then applies the ascent step entity by entity.
    Returns the number of ratings processed.
    """
    n = len(t_rows)
    dots = np.einsum("nsf,nsf->ns", target[t_rows], other[o_rows])
    coeff = -_row_softmax(dots)
    coeff[np.arange(n), ridx] += 1.0
    contrib = coeff[:, :, None] * other[o_rows]

    grad = np.zeros_like(target)
    t_sorted = t_rows[order]
    starts = np.flatnonzero(np.r_[True, t_sorted[1:] != t_sorted[:-1]])
    sums = np.add.reduceat(contrib[order].reshape(n, -1), starts, axis=0)
    grad[t_sorted[starts]] = sums.reshape(-1, *target.shape[1:])
    grad -= hp.gamma * counts[:, None, None] * target

    target += hp.eta * grad
    return n
