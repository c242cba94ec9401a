import os
from pathlib import Path

import numpy as np
import pytest

from resbemf import Hyperparams, RatingsDataset, ScoreSet, fit, split

SCORES_1_5 = ScoreSet((1.0, 2.0, 3.0, 4.0, 5.0))


def make_dataset(triples, score_set=None, test_pairs=(), user_ids=None, item_ids=None):
    """Build a RatingsDataset from (user, item, value) tuples with string ids."""
    users = [str(t[0]) for t in triples]
    items = [str(t[1]) for t in triples]
    values = np.array([float(t[2]) for t in triples])
    user_ids = list(user_ids) if user_ids else list(dict.fromkeys(users))
    item_ids = list(item_ids) if item_ids else list(dict.fromkeys(items))
    u_row = {u: j for j, u in enumerate(user_ids)}
    i_row = {i: j for j, i in enumerate(item_ids)}
    test_pairs = {(str(u), str(i)) for u, i in test_pairs}
    return RatingsDataset(
        user_ids=tuple(user_ids),
        item_ids=tuple(item_ids),
        users=np.array([u_row[u] for u in users]),
        items=np.array([i_row[i] for i in items]),
        values=values,
        is_test=np.array([(u, i) in test_pairs for u, i in zip(users, items)]),
        score_set=score_set or ScoreSet.inferred(values),
    )


def random_dataset(rng, n_users=5, n_items=7, score_set=SCORES_1_5, density=1.0):
    """Dense-ish random dataset over string ids u0.., i0.. ."""
    triples = []
    for u in range(n_users):
        for i in range(n_items):
            if rng.random() <= density:
                value = score_set.values[rng.integers(0, score_set.d)]
                triples.append((f"u{u}", f"i{i}", value))
    return make_dataset(
        triples,
        score_set=score_set,
        user_ids=[f"u{j}" for j in range(n_users)],
        item_ids=[f"i{j}" for j in range(n_items)],
    )


def planted_dataset(rng, n_users=40, n_items=30, noise=0.15, density=0.8):
    """Learnable synthetic data: block structure plus occasional noise.

    Users and items belong to hidden groups; the group pair fixes the
    rating, which is replaced by a uniform random score with probability
    `noise`.  A trained model should be confident (and right) on the clean
    majority, which makes reliability filtering effective.
    """
    pattern = np.array([[1.0, 4.0, 2.0], [5.0, 3.0, 1.0], [2.0, 5.0, 4.0]])
    user_group = rng.integers(0, 3, size=n_users)
    item_group = rng.integers(0, 3, size=n_items)
    triples = []
    for u in range(n_users):
        for i in range(n_items):
            if rng.random() > density:
                continue
            value = pattern[user_group[u], item_group[i]]
            if rng.random() < noise:
                value = float(rng.integers(1, 6))
            triples.append((f"u{u}", f"i{i}", value))
    return make_dataset(
        triples,
        score_set=SCORES_1_5,
        user_ids=[f"u{j}" for j in range(n_users)],
        item_ids=[f"i{j}" for j in range(n_items)],
    )


@pytest.fixture
def tiny_dense_dataset():
    rng = np.random.default_rng(11)
    return random_dataset(rng, n_users=4, n_items=4)


@pytest.fixture
def trained_model(tiny_dense_dataset):
    hp = Hyperparams(k=2, gamma=0.05, eta=0.05, m=40, seed=3)
    return fit(tiny_dense_dataset, hp)


def _find_dataset(env_var, *candidates):
    explicit = os.environ.get(env_var)
    if explicit:
        return Path(explicit)
    here = Path(__file__).resolve().parent.parent
    for rel in candidates:
        p = here / rel
        if p.exists():
            return p
    return None


def ml100k_path():
    """Path of the MovieLens 100K rating file (u.data), if available."""
    return _find_dataset("RESBEMF_ML100K", "data/ml-100k/u.data", "tests/data/ml-100k/u.data")


def filmtrust_path():
    """Path of the FilmTrust rating file (ratings.txt), if available."""
    return _find_dataset("RESBEMF_FILMTRUST", "data/filmtrust/ratings.txt", "tests/data/filmtrust/ratings.txt")
