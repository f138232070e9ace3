"""Fairness-aware re-ranking with a per-user quality floor.

Given a user's original ranking, items are re-scored as
``preference + weight * lift`` and re-sorted; the weight trades quality for
provider fairness.  NDCG of the re-sorted list is non-increasing in the
weight, so the largest weight that still clears the quality floor can be
located by bisection.  The offline procedure serves every user once against
a shared exposure ledger; the online procedure serves one request at a time
with a budget that grows with the request count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog, PreferenceMatrix, RankedList, original_ranking
from .exposure import ExposureLedger, FairnessNotion, total_exposure
from .quality import QualityReport, _dcg_items, _ideal_dcg_row
from .velocity import LiftAssignment, err_rates, normalize_lifts

# guards against float fuzz when n * ratio should be an exact integer
_POOL_EPS = 1e-9


@dataclass(frozen=True)
class RunConfig:
    """Hyperparameters of one re-ranking run."""

    k: int
    notion: FairnessNotion
    threshold: float = 0.9
    lambda_max: float = 16.0
    gap: float = 2.0**-7
    ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")
        if self.lambda_max <= 0:
            raise ValueError("lambda_max must be positive")
        if not 0.0 < self.gap < self.lambda_max:
            raise ValueError("gap must be in (0, lambda_max)")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError("ratio must be in (0, 1]")


def candidate_pool(ranking: RankedList, ratio: float, k: int | None = None) -> RankedList:
    """First ``ceil(n * ratio)`` items of the original ranking."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must be in (0, 1]")
    size = math.ceil(len(ranking) * ratio - _POOL_EPS)
    if k is not None and size < k:
        raise ValueError(f"pool of {size} items cannot fill {k} slots")
    return RankedList(ranking.user, ranking.items[:size])


def rerank_with_lambda(
    matrix: PreferenceMatrix,
    user: int,
    pool: RankedList,
    lifts: LiftAssignment,
    lam: float,
    k: int,
    catalog: Catalog,
) -> RankedList:
    """Sort the pool by lifted score and keep the top ``k``.

    Ties in the lifted score break by ascending item id, which also keeps
    items of the same provider in their original relative order for every
    weight.
    """
    if len(pool) < k:
        raise ValueError(f"pool of {len(pool)} items cannot fill {k} slots")
    ids = np.asarray(pool.items, dtype=np.int64)
    adjusted = matrix.scores[user, ids] + lam * lifts.by_provider[catalog.provider_of[ids]]
    order = np.lexsort((ids, -adjusted))
    return RankedList(user, tuple(ids[order[:k]].tolist()))


def binary_search_lambda(
    matrix: PreferenceMatrix,
    user: int,
    pool: RankedList,
    lifts: LiftAssignment,
    config: RunConfig,
    catalog: Catalog,
) -> tuple[float, RankedList, float]:
    """Largest fairness weight whose re-ranked list still clears the floor."""
    lam, rlist, value, _ = binary_search_lambda_traced(
        matrix, user, pool, lifts, config, catalog
    )
    return lam, rlist, value


def binary_search_lambda_traced(
    matrix: PreferenceMatrix,
    user: int,
    pool: RankedList,
    lifts: LiftAssignment,
    config: RunConfig,
    catalog: Catalog,
) -> tuple[float, RankedList, float, int]:
    """As :func:`binary_search_lambda`, also reporting the evaluation count.

    ``pool`` must come from :func:`candidate_pool`, i.e. be a prefix of the
    user's own ranking; its first k items then score NDCG 1, so weight 0
    always clears the floor.  Bisection keeps the invariant
    NDCG(lo) >= threshold and stops once hi - lo <= gap, returning the
    largest probed weight that passed.  When every probe passes, lambda_max
    itself is probed last and returned if it clears the floor.  At most
    ``ceil(log2(lambda_max / gap)) + 1`` NDCG evaluations are spent: one per
    halving plus, in the all-pass case, one on lambda_max.
    """
    if len(pool) < config.k:
        raise ValueError(f"pool of {len(pool)} items cannot fill {config.k} slots")
    ids = np.asarray(pool.items, dtype=np.int64)
    row = matrix.scores[user]
    scores = row[ids]
    item_lifts = lifts.by_provider[catalog.provider_of[ids]]
    ideal = _ideal_dcg_row(row, config.k)
    k = config.k

    def evaluate(lam: float) -> tuple[RankedList, float]:
        adjusted = scores + lam * item_lifts
        order = np.lexsort((ids, -adjusted))
        top = ids[order[:k]]
        if ideal == 0.0:
            value = 1.0
        else:
            value = min(_dcg_items(row, top, k) / ideal, 1.0)
        return RankedList(user, tuple(top.tolist())), value

    # the pool is a prefix of the user's own ranking, so weight 0 leaves it
    # untouched and its NDCG is exactly 1
    identity = RankedList(user, pool.items[:k])

    # a constant shift cannot reorder anything, so the weight is irrelevant
    if np.all(item_lifts == item_lifts[0]):
        return 0.0, identity, 1.0, 0

    evaluations = 0
    lo, hi = 0.0, config.lambda_max
    best_lam, best_list, best_value = 0.0, identity, 1.0
    while hi - lo > config.gap:
        mid = (lo + hi) / 2.0
        evaluations += 1
        mid_list, mid_value = evaluate(mid)
        if mid_value >= config.threshold:
            lo = mid
            best_lam, best_list, best_value = mid, mid_list, mid_value
        else:
            hi = mid
    if hi == config.lambda_max:
        # no probe ever failed; the floor may hold all the way up
        evaluations += 1
        top_list, top_value = evaluate(config.lambda_max)
        if top_value >= config.threshold:
            return config.lambda_max, top_list, top_value, evaluations
    return best_lam, best_list, best_value, evaluations


def _lists_to_report(
    matrix: PreferenceMatrix, lists: dict[int, RankedList], k: int
) -> QualityReport:
    per_user: dict[int, float] = {}
    for user, rlist in lists.items():
        row = matrix.scores[user]
        ideal = _ideal_dcg_row(row, k)
        if ideal == 0.0:
            per_user[user] = 1.0
        else:
            items = np.asarray(rlist.items, dtype=np.int64)
            per_user[user] = min(_dcg_items(row, items, k) / ideal, 1.0)
    return QualityReport.from_values(per_user)


def fairsort_offline(
    matrix: PreferenceMatrix,
    catalog: Catalog,
    config: RunConfig,
    *,
    order: list[int] | None = None,
    exposure_update: str = "replace",
) -> tuple[dict[int, RankedList], ExposureLedger, QualityReport]:
    """Serve every user once, steering exposure toward under-served providers.

    The ledger is preloaded with each user's plain top-K list as a stand-in;
    when a user is actually served, the stand-in is swapped for the re-ranked
    list (``exposure_update="replace"``), which keeps the ledger total pinned
    at the run budget throughout.  ``exposure_update="accumulate"`` keeps the
    stand-ins and simply adds the served lists on top, for sensitivity
    experiments.  Users are served in ascending id order unless an explicit
    ``order`` permutation is given.
    """
    if exposure_update not in ("replace", "accumulate"):
        raise ValueError("exposure_update must be 'replace' or 'accumulate'")
    m = matrix.n_users
    if order is None:
        order = list(range(m))
    elif sorted(order) != list(range(m)):
        raise ValueError("order must be a permutation of all user ids")

    rankings = {u: original_ranking(matrix, u) for u in range(m)}
    provisional = {
        u: RankedList(u, rankings[u].items[: config.k]) for u in range(m)
    }
    ledger = ExposureLedger.create(total_exposure(m, config.k), catalog, config.notion)
    for u in range(m):
        ledger.apply(provisional[u], config.k)

    lists: dict[int, RankedList] = {}
    for u in order:
        lifts = normalize_lifts(err_rates(ledger, catalog))
        pool = candidate_pool(rankings[u], config.ratio, config.k)
        _, served, _ = binary_search_lambda(matrix, u, pool, lifts, config, catalog)
        if exposure_update == "replace":
            ledger.retract(provisional[u], config.k)
        ledger.apply(served, config.k)
        lists[u] = served

    return lists, ledger, _lists_to_report(matrix, lists, config.k)


@dataclass
class OnlineState:
    """Mutable state threaded through consecutive online requests."""

    ledger: ExposureLedger
    served: int = 0
    ndcg_log: list[tuple[int, float]] = field(default_factory=list)

    @classmethod
    def fresh(cls, catalog: Catalog, notion: FairnessNotion) -> "OnlineState":
        return cls(ledger=ExposureLedger.create(0.0, catalog, notion))


def fairsort_online_step(
    state: OnlineState,
    matrix: PreferenceMatrix,
    catalog: Catalog,
    user: int,
    config: RunConfig,
    *,
    exposure_update: str = "replace",
) -> tuple[RankedList, OnlineState]:
    """Serve one request, growing the exposure budget by one list.

    The current request's plain top-K contribution is applied before lifts
    are computed and swapped for the served list afterwards; contributions
    of past requests stay on the ledger permanently.
    """
    if exposure_update not in ("replace", "accumulate"):
        raise ValueError("exposure_update must be 'replace' or 'accumulate'")
    if state.served != len(state.ndcg_log):
        raise ValueError("online state is inconsistent")
    ranking = original_ranking(matrix, user)
    provisional = RankedList(user, ranking.items[: config.k])

    state.ledger.set_budget(total_exposure(state.served + 1, config.k))
    state.ledger.apply(provisional, config.k)
    lifts = normalize_lifts(err_rates(state.ledger, catalog))
    pool = candidate_pool(ranking, config.ratio, config.k)
    _, served, value = binary_search_lambda(matrix, user, pool, lifts, config, catalog)
    if exposure_update == "replace":
        state.ledger.retract(provisional, config.k)
    state.ledger.apply(served, config.k)

    state.served += 1
    state.ndcg_log.append((user, value))
    return served, state
