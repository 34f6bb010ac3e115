"""Independent reference implementations used by the tests."""

from __future__ import annotations

import itertools
import json
from collections import defaultdict

import numpy as np
from hypothesis import strategies as st

from cliquescout.graph import Graph
from cliquescout.store import ReviewStore


def brute_qualifying(store: ReviewStore, d: int) -> dict[tuple[int, int], int]:
    """Qualifying-venue count per user pair by comparing every pair of review records of each venue."""
    by_venue = defaultdict(list)
    for r in store.reviews():
        by_venue[r.venue].append(r)
    venues_of_pair = defaultdict(set)
    for venue, rows in by_venue.items():
        for a, b in itertools.combinations(rows, 2):
            if a.user != b.user and abs(a.date - b.date) <= d:
                venues_of_pair[(min(a.user, b.user), max(a.user, b.user))].add(venue)
    return {p: len(v) for p, v in venues_of_pair.items()}


def brute_edges(store: ReviewStore, k: int, d: int) -> set[tuple[str, str]]:
    return {
        tuple(sorted((store.user_ids[u], store.user_ids[v])))
        for (u, v), c in brute_qualifying(store, d).items()
        if c >= k
    }


def graph_edges_by_name(graph) -> set[tuple[str, str]]:
    return {tuple(sorted((graph.labels[u], graph.labels[v]))) for u, v, _ in graph.edges()}


def random_store(rng: np.random.Generator, n_users: int, n_venues: int, n_reviews: int, span: int) -> ReviewStore:
    users = rng.integers(0, n_users, size=n_reviews)
    venues = rng.integers(0, n_venues, size=n_reviews)
    dates = 15000 + rng.integers(0, span, size=n_reviews)
    stars = rng.integers(1, 6, size=n_reviews)
    store, _ = ReviewStore.from_columns(
        [f"user{i:03d}" for i in range(n_users)],
        [f"venue{i:03d}" for i in range(n_venues)],
        users,
        venues,
        dates,
        stars,
    )
    return store


def review_line(user: str, venue: str, date: str, stars=None) -> str:
    obj = {"user_id": user, "business_id": venue, "date": date}
    if stars is not None:
        obj["stars"] = stars
    return json.dumps(obj) + "\n"


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def without_edge(g: Graph, u: int, v: int) -> Graph:
    return Graph.from_edges(g.n, [e for e in g.edge_set() if e != (min(u, v), max(u, v))])


@st.composite
def small_graphs(draw, max_n: int = 9):
    n = draw(st.integers(0, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph.from_edges(n, chosen)
