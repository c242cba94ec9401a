"""Rating file ingestion, train/test partitioning, folds and statistics."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import ParseError
from .scores import ScoreSet

log = logging.getLogger(__name__)

DELIMITER_NAMES = {"tab": "\t", "comma": ",", "space": " ", "whitespace": None}


@dataclass(frozen=True)
class RatingFormat:
    """Shape of a delimiter-separated rating file.

    delimiter None splits on any whitespace run.  columns names the
    leading fields in file order; trailing extras (timestamps etc.) are
    ignored.
    """

    delimiter: Optional[str] = "\t"
    columns: tuple[str, str, str] = ("user", "item", "rating")
    header: bool = False

    def __post_init__(self):
        if sorted(self.columns) != ["item", "rating", "user"]:
            raise ValueError("columns must be a permutation of user, item, rating")


@dataclass(frozen=True)
class Triples:
    """Parallel (user id, item id, rating value) columns."""

    users: tuple
    items: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.array(self.values, dtype=np.float64))
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[tuple]:
        return zip(self.users, self.items, self.values.tolist())


@dataclass(frozen=True)
class DatasetStats:
    n_users: int
    n_items: int
    n_ratings: int
    n_test_ratings: int
    score_range: tuple[float, float]


@dataclass(frozen=True)
class RatingsDataset:
    """Sparse user-item ratings with a train/test tag per triple.

    Identifiers are kept as external strings in first-appearance order;
    users/items hold their row indices, values the exact rating values.
    Instances are immutable: the arrays are read-only and re-partitioning
    returns a new dataset.
    """

    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    users: np.ndarray
    items: np.ndarray
    values: np.ndarray
    is_test: np.ndarray
    score_set: ScoreSet
    n_duplicates: int = 0

    def __post_init__(self):
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "item_ids", tuple(self.item_ids))
        users = np.array(self.users, dtype=np.intp)
        items = np.array(self.items, dtype=np.intp)
        values = np.array(self.values, dtype=np.float64)
        is_test = np.array(self.is_test, dtype=bool)
        n = len(values)
        if not (len(users) == len(items) == len(is_test) == n):
            raise ValueError("triple columns must have equal length")
        if n:
            if users.min() < 0 or users.max() >= len(self.user_ids):
                raise ValueError("user index out of bounds")
            if items.min() < 0 or items.max() >= len(self.item_ids):
                raise ValueError("item index out of bounds")
            pair_keys = users.astype(np.int64) * len(self.item_ids) + items
            if len(np.unique(pair_keys)) != n:
                raise ValueError("duplicate (user, item) pair")
            self.score_set.indices(values)  # every rating must be a known score
        for arr, name in ((users, "users"), (items, "items"), (values, "values"), (is_test, "is_test")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- basic facts -------------------------------------------------------

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_ratings(self) -> int:
        return len(self.values)

    @property
    def n_test_ratings(self) -> int:
        return int(self.is_test.sum())

    def train_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.is_test)

    def test_rows(self) -> np.ndarray:
        return np.flatnonzero(self.is_test)

    def triples(self, rows: np.ndarray) -> Triples:
        rows = np.asarray(rows, dtype=np.intp)
        return Triples(
            users=tuple(self.user_ids[u] for u in self.users[rows]),
            items=tuple(self.item_ids[i] for i in self.items[rows]),
            values=self.values[rows],
        )

    def train_triples(self) -> Triples:
        return self.triples(self.train_rows())

    def test_triples(self) -> Triples:
        return self.triples(self.test_rows())


@dataclass(frozen=True)
class FoldAssignment:
    """Cross-validation fold index per dataset row; -1 marks test rows."""

    n_folds: int
    fold_of: np.ndarray

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=np.intp)
        fold_of.setflags(write=False)
        object.__setattr__(self, "fold_of", fold_of)

    def rows_in(self, fold: int) -> np.ndarray:
        """Rows held out as the validation part of the given fold."""
        return np.flatnonzero(self.fold_of == fold)

    def rows_out(self, fold: int) -> np.ndarray:
        """Training rows for the given fold (all other folds)."""
        return np.flatnonzero((self.fold_of >= 0) & (self.fold_of != fold))


def parse_ratings(source, fmt: Optional[RatingFormat] = None, score_set: Optional[ScoreSet] = None) -> RatingsDataset:
    """Parse a delimiter-separated rating stream into a dataset.

    Identifiers are kept as strings in first-appearance order.  Duplicate
    (user, item) lines keep the last value; the number of overwritten
    lines is logged and recorded on the dataset.  Without an explicit
    score_set the score vocabulary is inferred as the sorted set of
    distinct rating values.  All triples start in the train partition.
    """
    fmt = fmt or RatingFormat()
    pos = {name: j for j, name in enumerate(fmt.columns)}
    u_pos, i_pos, r_pos = pos["user"], pos["item"], pos["rating"]

    user_rows: dict[str, int] = {}
    item_rows: dict[str, int] = {}
    ratings: dict[tuple[int, int], float] = {}
    n_duplicates = 0

    with _as_text_lines(source) as lines:
        for lineno, raw in enumerate(lines, start=1):
            if fmt.header and lineno == 1:
                continue
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split(fmt.delimiter) if fmt.delimiter is not None else line.split()
            if len(fields) < 3:
                raise ParseError(f"expected at least 3 fields, got {len(fields)}", line=lineno)
            try:
                value = float(fields[r_pos])
            except ValueError:
                raise ParseError(f"bad rating value {fields[r_pos]!r}", line=lineno) from None
            if not np.isfinite(value):
                raise ParseError(f"non-finite rating value {fields[r_pos]!r}", line=lineno)
            if score_set is not None and not score_set.contains(value):
                raise ParseError(f"rating value {value!r} is not in the score set", line=lineno)
            user = fields[u_pos].strip()
            item = fields[i_pos].strip()
            if not user or not item:
                raise ParseError("empty user or item identifier", line=lineno)
            u = user_rows.setdefault(user, len(user_rows))
            i = item_rows.setdefault(item, len(item_rows))
            if (u, i) in ratings:
                n_duplicates += 1
            ratings[(u, i)] = value

    if not ratings:
        raise ParseError("no ratings")
    if n_duplicates:
        log.warning("%d duplicate user-item pairs overwritten (last value wins)", n_duplicates)

    users = np.fromiter((u for u, _ in ratings), dtype=np.intp, count=len(ratings))
    items = np.fromiter((i for _, i in ratings), dtype=np.intp, count=len(ratings))
    values = np.fromiter(ratings.values(), dtype=np.float64, count=len(ratings))
    return RatingsDataset(
        user_ids=tuple(user_rows),
        item_ids=tuple(item_rows),
        users=users,
        items=items,
        values=values,
        is_test=np.zeros(len(ratings), dtype=bool),
        score_set=score_set or ScoreSet.inferred(values),
        n_duplicates=n_duplicates,
    )


class _as_text_lines:
    """Context manager yielding text lines from a path, text or byte stream."""

    def __init__(self, source):
        self.source = source
        self._fh = None
        self._wrapper = None

    def __enter__(self):
        src = self.source
        if isinstance(src, (str, Path)):
            self._fh = open(src, "r", encoding="utf-8")
            return self._fh
        if isinstance(src, bytes):
            return io.StringIO(src.decode("utf-8"))
        if hasattr(src, "read"):
            probe = src.read(0)
            if isinstance(probe, bytes):
                self._wrapper = io.TextIOWrapper(src, encoding="utf-8")
                return self._wrapper
            return src
        raise TypeError(f"cannot read ratings from {type(src).__name__}")

    def __exit__(self, *exc):
        if self._fh is not None:
            self._fh.close()
        if self._wrapper is not None:
            self._wrapper.detach()  # leave the caller's byte stream open
        return False


def write_ratings(data: RatingsDataset, target, fmt: Optional[RatingFormat] = None) -> None:
    """Serialize the triples back to delimiter-separated text.

    Values are written with repr so that parsing returns the exact same
    floats; parse(write(data)) round-trips the triple set.
    """
    fmt = fmt or RatingFormat()
    delim = fmt.delimiter if fmt.delimiter is not None else " "
    order = {name: None for name in fmt.columns}
    with _as_sink(target) as fh:
        for u, i, v in data.triples(np.arange(data.n_ratings)):
            order["user"], order["item"], order["rating"] = u, i, repr(v)
            fh.write(delim.join(order[name] for name in fmt.columns) + "\n")


def write_partition_csv(data: RatingsDataset, target, folds: Optional[FoldAssignment] = None) -> None:
    """Export per-triple partition tags (and fold indices) as CSV."""
    with _as_sink(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["user", "item", "rating", "tag"] + (["fold"] if folds is not None else [])
        writer.writerow(header)
        for row, (u, i, v) in enumerate(data.triples(np.arange(data.n_ratings))):
            tag = "test" if data.is_test[row] else "train"
            line = [u, i, repr(v), tag]
            if folds is not None:
                fold = int(folds.fold_of[row])
                line.append("" if fold < 0 else str(fold))
            writer.writerow(line)


class _as_sink:
    def __init__(self, target):
        self.target = target
        self._close = False

    def __enter__(self):
        if isinstance(self.target, (str, Path)):
            self._fh = open(self.target, "w", encoding="utf-8", newline="")
            self._close = True
            return self._fh
        return self.target

    def __exit__(self, *exc):
        if self._close:
            self._fh.close()
        return False


def split(data: RatingsDataset, test_fraction: float, seed: int) -> RatingsDataset:
    """Retag the triples into train/test with a seeded shuffle.

    Exactly round(test_fraction * n_ratings) triples become test;
    deterministic given the seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    if data.n_ratings == 0:
        raise ValueError("cannot split an empty dataset")
    n_test = int(round(test_fraction * data.n_ratings))
    order = np.random.default_rng(seed).permutation(data.n_ratings)
    is_test = np.zeros(data.n_ratings, dtype=bool)
    is_test[order[:n_test]] = True
    return dataclasses.replace(data, is_test=is_test)


def make_folds(data: RatingsDataset, n_folds: int, seed: int) -> FoldAssignment:
    """Assign the train partition to folds by seeded shuffle + round robin.

    Fold sizes differ by at most one; deterministic given the seed.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    train = data.train_rows()
    if len(train) < n_folds:
        raise ValueError(f"train partition has {len(train)} ratings, fewer than {n_folds} folds")
    shuffled = np.random.default_rng(seed).permutation(train)
    fold_of = np.full(data.n_ratings, -1, dtype=np.intp)
    fold_of[shuffled] = np.arange(len(shuffled)) % n_folds
    return FoldAssignment(n_folds=n_folds, fold_of=fold_of)


def stats(data: RatingsDataset) -> DatasetStats:
    """Counts and score range of the dataset."""
    return DatasetStats(
        n_users=data.n_users,
        n_items=data.n_items,
        n_ratings=data.n_ratings,
        n_test_ratings=data.n_test_ratings,
        score_range=(data.score_set.min, data.score_set.max),
    )
