"""(k, d) reviewer-similarity graphs built by a per-venue temporal pair join.

Two users are joined when they reviewed at least ``k`` common venues with,
for each such venue, some pair of their reviews at most ``d`` days apart.

The join walks each venue's date-sorted reviews once.  For every review it
pairs the later reviews inside the ``d``-day window, keeps one row per
``(user pair, venue)`` holding the smallest gap seen, and thresholds the
per-pair venue counts.  A parameter sweep runs the join once at the largest
``d`` and re-thresholds the gap column for every smaller one.
"""

from __future__ import annotations

import bisect
import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .graph import Graph, csr_from_pairs
from .store import ReviewStore

log = logging.getLogger(__name__)

DEFAULT_PAIR_BUDGET = 10**8
CHUNK_PAIRS = 1 << 22


class ConfigurationError(Exception):
    pass


class PairBudgetExceeded(Exception):
    pass


@dataclass(frozen=True, order=True)
class KDParams:
    k: int
    d: int

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if int(self.d) != self.d or self.d < 0:
            raise ValueError(f"d must be a non-negative integer, got {self.d!r}")


class WeightMode(enum.Enum):
    UNWEIGHTED = "unweighted"
    CO_REVIEW_COUNT = "co_review_count"
    FRIEND_INTERSECTION = "friend_intersection"

    @classmethod
    def parse(cls, text: "str | WeightMode") -> "WeightMode":
        if isinstance(text, cls):
            return text
        try:
            return cls(text.lower().replace("-", "_"))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown weight mode {text!r} (choose from {choices})") from None


class KDGraph(Graph):
    """Reviewer-similarity graph.  Vertex ``i`` is store user ``users[i]``."""

    def __init__(self, params: KDParams, mode: WeightMode, users: np.ndarray, indptr, indices, weights, labels):
        super().__init__(len(users), indptr, indices, weights, labels)
        self.params = params
        self.mode = mode
        self.users = np.asarray(users, dtype=np.int32)

    def vertex_of(self, user: int) -> int | None:
        i = int(np.searchsorted(self.users, user))
        return i if i < self.n and self.users[i] == user else None


# -- pairwise definition -----------------------------------------------------


def qualifying_evidence(store: ReviewStore, u: int, v: int, d: int) -> list[tuple[int, int, int]]:
    """``(venue, date_u, date_v)`` for every venue where ``u`` and ``v`` have reviews ``<= d`` days apart.

    Per venue the closest pair of dates is reported (earliest on ties).
    """
    if u == v:
        raise ValueError("qualifying venues need two distinct users")
    ru = store.user_reviews(u)
    rv = store.user_reviews(v)
    if len(rv) < len(ru):
        common = [x for x in rv if x in ru]
    else:
        common = [x for x in ru if x in rv]
    out = []
    for venue in sorted(common):
        best = None
        dates_v = rv[venue]
        for du in ru[venue]:
            i = bisect.bisect_left(dates_v, du - d)
            while i < len(dates_v) and dates_v[i] <= du + d:
                gap = abs(dates_v[i] - du)
                if best is None or gap < best[0]:
                    best = (gap, du, dates_v[i])
                i += 1
        if best is not None:
            out.append((venue, best[1], best[2]))
    return out


def qualifying_venues(store: ReviewStore, u: int, v: int, d: int) -> int:
    """Number of venues both users reviewed within ``d`` days of each other."""
    return len(qualifying_evidence(store, u, v, d))


# -- the join ----------------------------------------------------------------


@dataclass(frozen=True)
class PairGaps:
    """One row per (user pair, venue) with a qualifying review pair.

    Rows are sorted by ``(lo, hi, venue)``; ``gap`` is the smallest date
    difference between the pair's reviews of that venue.
    """

    n_users: int
    d_max: int
    lo: np.ndarray
    hi: np.ndarray
    venue: np.ndarray
    gap: np.ndarray


def _window_ends(store: ReviewStore, d: int) -> np.ndarray:
    venues = store.review_venues().astype(np.int64)
    dates = store.date.astype(np.int64)
    base = int(dates.min())
    span = int(dates.max()) - base + d + 2
    key = venues * span + (dates - base)
    return np.searchsorted(key, key + d, side="right")


def _join_block(users, dates, venues, n_users, a, b, counts):
    c = counts[a:b]
    total = int(c.sum())
    i = np.repeat(np.arange(a, b, dtype=np.int64), c)
    starts = np.cumsum(c) - c
    j = i + 1 + (np.arange(total, dtype=np.int64) - np.repeat(starts, c))
    ui, uj = users[i], users[j]
    keep = ui != uj
    i, j, ui, uj = i[keep], j[keep], ui[keep], uj[keep]
    pair = np.minimum(ui, uj).astype(np.int64) * n_users + np.maximum(ui, uj)
    return _min_gap_rows(pair, venues[i], dates[j] - dates[i])


def _min_gap_rows(pair, venue, gap):
    order = np.lexsort((gap, venue, pair))
    pair, venue, gap = pair[order], venue[order], gap[order]
    first = np.ones(len(pair), dtype=bool)
    first[1:] = (pair[1:] != pair[:-1]) | (venue[1:] != venue[:-1])
    return pair[first], venue[first], gap[first]


def venue_pair_gaps(
    store: ReviewStore,
    d_max: int,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
    threads: int = 1,
    chunk_pairs: int = CHUNK_PAIRS,
) -> PairGaps:
    """Run the sliding-window join over every venue at window ``d_max``."""
    empty = np.zeros(0, dtype=np.int32)
    if store.n_reviews == 0:
        return PairGaps(store.n_users, d_max, empty, empty, empty, empty)

    n = store.n_reviews
    ends = _window_ends(store, d_max)
    counts = ends - np.arange(n) - 1
    venues = store.review_venues()

    per_venue = np.bincount(venues, weights=counts, minlength=store.n_venues)
    worst = int(np.argmax(per_venue))
    if per_venue[worst] > pair_budget:
        raise PairBudgetExceeded(
            f"venue {store.venue_ids[worst]!r} would generate {int(per_venue[worst])} review pairs "
            f"within {d_max} days (budget {pair_budget})"
        )

    cum = np.cumsum(counts)
    total = int(cum[-1])
    cuts = np.searchsorted(cum, np.arange(chunk_pairs, total, chunk_pairs), side="left")
    bounds = np.unique(np.concatenate([[0], cuts + 1, [n]])).clip(0, n)
    blocks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    log.debug("join: %d candidate review pairs in %d blocks", total, len(blocks))

    def run(block):
        return _join_block(store.user, store.date, venues, store.n_users, block[0], block[1], counts)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]

    if parts:
        pair = np.concatenate([p[0] for p in parts])
        venue = np.concatenate([p[1] for p in parts])
        gap = np.concatenate([p[2] for p in parts])
        if len(parts) > 1:
            # a venue can straddle two blocks
            pair, venue, gap = _min_gap_rows(pair, venue, gap)
    else:
        pair = np.zeros(0, dtype=np.int64)
        venue = gap = empty
    lo, hi = np.divmod(pair, store.n_users)
    return PairGaps(
        store.n_users, d_max, lo.astype(np.int32), hi.astype(np.int32), venue.astype(np.int32), gap.astype(np.int32)
    )


# -- graph construction ------------------------------------------------------


def _friend_intersections(store: ReviewStore, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    out = np.empty(len(lo), dtype=np.int64)
    for i, (u, v) in enumerate(zip(lo.tolist(), hi.tolist())):
        out[i] = len(np.intersect1d(store.friends_of(u), store.friends_of(v), assume_unique=True))
    return out


def graph_from_gaps(store: ReviewStore, gaps: PairGaps, params: KDParams, mode: WeightMode) -> KDGraph:
    """Threshold a join result at ``params``; ``params.d`` must not exceed the join window."""
    if params.d > gaps.d_max:
        raise ValueError(f"join window {gaps.d_max} is narrower than d={params.d}")
    mask = gaps.gap <= params.d
    lo, hi = gaps.lo[mask], gaps.hi[mask]
    if len(lo):
        change = np.ones(len(lo), dtype=bool)
        change[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        starts = np.flatnonzero(change)
        venue_counts = np.diff(np.append(starts, len(lo)))
        keep = venue_counts >= params.k
        lo, hi, venue_counts = lo[starts][keep], hi[starts][keep], venue_counts[keep]
    else:
        venue_counts = np.zeros(0, dtype=np.int64)

    if mode is WeightMode.CO_REVIEW_COUNT:
        weights = venue_counts
    elif mode is WeightMode.FRIEND_INTERSECTION:
        weights = _friend_intersections(store, lo, hi)
    else:
        weights = np.ones(len(lo), dtype=np.int64)

    users = np.unique(np.concatenate([lo, hi])).astype(np.int32)
    vlo = np.searchsorted(users, lo)
    vhi = np.searchsorted(users, hi)
    indptr, indices, wt = csr_from_pairs(len(users), vlo, vhi, weights)
    labels = [store.user_ids[u] for u in users.tolist()]
    return KDGraph(params, mode, users, indptr, indices, wt, labels)


def _check_mode(store: ReviewStore, mode: WeightMode) -> None:
    if mode is WeightMode.FRIEND_INTERSECTION and not store.has_friends:
        raise ConfigurationError("friend_intersection weights need a store with friend lists (ingest users first)")


def build_kd_graph(
    store: ReviewStore,
    params: KDParams,
    mode: WeightMode = WeightMode.UNWEIGHTED,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
    threads: int = 1,
) -> KDGraph:
    mode = WeightMode.parse(mode)
    _check_mode(store, mode)
    gaps = venue_pair_gaps(store, params.d, pair_budget=pair_budget, threads=threads)
    return graph_from_gaps(store, gaps, params, mode)


def kd_parameter_sweep(
    store: ReviewStore,
    k_list: Iterable[int],
    d_list: Iterable[int],
    mode: WeightMode = WeightMode.UNWEIGHTED,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
    threads: int = 1,
) -> dict[tuple[int, int], KDGraph]:
    """Build every (k, d) graph of the grid from a single join at ``max(d_list)``."""
    ks = sorted(set(k_list))
    ds = sorted(set(d_list))
    if not ks or not ds:
        raise ValueError("k and d lists must be non-empty")
    grid = [KDParams(k, d) for k in ks for d in ds]
    mode = WeightMode.parse(mode)
    _check_mode(store, mode)
    gaps = venue_pair_gaps(store, ds[-1], pair_budget=pair_budget, threads=threads)
    return {(p.k, p.d): graph_from_gaps(store, gaps, p, mode) for p in grid}
