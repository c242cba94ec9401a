"""Ordered discrete rating vocabularies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class ScoreSet:
    """The ordered set of values a rating may take.

    Scores are kept as exact floats (half-star scales such as 0.5..4.0 are
    representable); positions in the ordered tuple are the integer class
    indices the models work with.
    """

    values: tuple[float, ...]
    _lookup: dict[float, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise ValueError("a score set needs at least two distinct values")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("score values must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_lookup", {v: j for j, v in enumerate(values)})

    @classmethod
    def inferred(cls, values: Iterable[float]) -> "ScoreSet":
        """Build the score set from the distinct values seen in data."""
        return cls(tuple(sorted(set(float(v) for v in values))))

    @property
    def d(self) -> int:
        return len(self.values)

    @property
    def min(self) -> float:
        return self.values[0]

    @property
    def max(self) -> float:
        return self.values[-1]

    @property
    def width(self) -> float:
        """Score range max - min, the MAE normalization constant."""
        return self.values[-1] - self.values[0]

    def index(self, value: float) -> int:
        try:
            return self._lookup[float(value)]
        except KeyError:
            raise ValueError(f"rating value {value!r} is not in the score set") from None

    def value(self, index: int) -> float:
        return self.values[index]

    def indices(self, values) -> np.ndarray:
        """Vectorized value -> index mapping; rejects unknown values."""
        vals = np.asarray(values, dtype=np.float64)
        table = np.asarray(self.values)
        idx = np.clip(np.searchsorted(table, vals), 0, self.d - 1)
        bad = table[idx] != vals
        if np.any(bad):
            offender = vals[np.argmax(bad)]
            raise ValueError(f"rating value {offender!r} is not in the score set")
        return idx.astype(np.intp)

    def contains(self, value: float) -> bool:
        return float(value) in self._lookup
