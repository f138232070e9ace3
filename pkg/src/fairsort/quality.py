"""Ranking quality: DCG and NDCG against the user's own best ordering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import PreferenceMatrix, RankedList
from .exposure import _slot_weights


def _dcg_items(row: np.ndarray, items: np.ndarray, k: int) -> float:
    return float(row[items[:k]] @ _slot_weights(k))


def _ideal_dcg_row(row: np.ndarray, k: int) -> float:
    # gather through the same code path as _dcg_items so that scoring the
    # user's own top-k yields a bit-exact ratio of 1
    order = np.argsort(-row, kind="stable")[:k]
    return float(row[order] @ _slot_weights(k))


def dcg(matrix: PreferenceMatrix, user: int, rlist: RankedList, k: int) -> float:
    """Discounted cumulative gain of the first ``k`` slots of a list."""
    if len(rlist) < k:
        raise ValueError(f"list has {len(rlist)} items, need {k}")
    items = np.asarray(rlist.items, dtype=np.int64)
    return _dcg_items(matrix.scores[user], items, k)


def ideal_dcg(matrix: PreferenceMatrix, user: int, k: int) -> float:
    """DCG of the user's top ``k`` items by preference; the NDCG denominator."""
    if k > matrix.n_items:
        raise ValueError(f"k={k} exceeds the {matrix.n_items}-item universe")
    return _ideal_dcg_row(matrix.scores[user], k)


def ndcg(matrix: PreferenceMatrix, user: int, rlist: RankedList, k: int) -> float:
    """Normalized DCG in [0, 1].

    A user with no positive preference at all cannot be served better or
    worse, so an all-zero ideal yields 1.0 by definition.
    """
    ideal = ideal_dcg(matrix, user, k)
    if ideal == 0.0:
        return 1.0
    value = dcg(matrix, user, rlist, k) / ideal
    # the ratio can only exceed 1 by float noise
    return min(value, 1.0)


@dataclass(frozen=True)
class QualityReport:
    """Per-user NDCG values for one completed run."""

    per_user: dict[int, float]
    total: float

    @classmethod
    def from_values(cls, per_user: dict[int, float]) -> "QualityReport":
        return cls(per_user=dict(per_user), total=float(sum(per_user.values())))
