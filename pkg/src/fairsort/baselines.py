"""Reference list generators the re-ranker is compared against.

``top_k`` is the quality ceiling, ``mixed_k`` and ``all_random`` trade
quality for diversity blindly, and ``min_exposure`` chases item-level
exposure equality with no regard for preference at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import PreferenceMatrix, RankedList, original_ranking
from .exposure import _slot_weights


def top_k(matrix: PreferenceMatrix, user: int, k: int) -> RankedList:
    """The user's k best items in preference order."""
    ranking = original_ranking(matrix, user)
    if len(ranking) < k:
        raise ValueError(f"k={k} exceeds the {len(ranking)}-item universe")
    return RankedList(user, ranking.items[:k])


def mixed_k(matrix: PreferenceMatrix, user: int, k: int, seed) -> RankedList:
    """Top half by preference, rest drawn uniformly from the remainder.

    The first ``ceil(k/2)`` slots replicate top-K; the remaining slots are
    sampled without replacement from the rest of the ranking.  ``seed`` is
    anything ``numpy.random.default_rng`` accepts.
    """
    ranking = original_ranking(matrix, user)
    if len(ranking) < k:
        raise ValueError(f"k={k} exceeds the {len(ranking)}-item universe")
    head_len = (k + 1) // 2
    head = ranking.items[:head_len]
    remainder = np.asarray(ranking.items[head_len:], dtype=np.int64)
    rng = np.random.default_rng(seed)
    tail = rng.choice(remainder, size=k - head_len, replace=False)
    return RankedList(user, head + tuple(tail.tolist()))


def all_random(matrix: PreferenceMatrix, user: int, k: int, seed) -> RankedList:
    """k items drawn uniformly without replacement, kept in draw order."""
    if matrix.n_items < k:
        raise ValueError(f"k={k} exceeds the {matrix.n_items}-item universe")
    rng = np.random.default_rng(seed)
    picks = rng.choice(matrix.n_items, size=k, replace=False)
    return RankedList(user, tuple(int(i) for i in picks))


@dataclass
class ItemExposureTracker:
    """Accumulated per-item exposure for the min-exposure baseline."""

    exposure: np.ndarray

    @classmethod
    def fresh(cls, n_items: int) -> "ItemExposureTracker":
        return cls(exposure=np.zeros(n_items, dtype=np.float64))


def min_exposure(
    tracker: ItemExposureTracker,
    catalog,
    matrix: PreferenceMatrix,
    user: int,
    k: int,
) -> RankedList:
    """Fill each slot with the least-exposed item so far, ties by item id.

    Exposure counts are frozen while a list is being built and credited per
    slot weight once it is complete, so the list is simply the k smallest
    entries of the tracker.
    """
    n = tracker.exposure.size
    if n < k:
        raise ValueError(f"k={k} exceeds the {n}-item universe")
    order = np.lexsort((np.arange(n), tracker.exposure))
    items = order[:k]
    tracker.exposure[items] += _slot_weights(k)
    return RankedList(user, tuple(items.tolist()))
