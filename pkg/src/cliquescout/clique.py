"""Maximal clique enumeration: Bron-Kerbosch with pivoting over a degeneracy order."""

from __future__ import annotations

import heapq
from collections import Counter
from typing import Iterable, Iterator, Sequence, Union

from .graph import Graph

VertexSet = tuple[int, ...]
Adjacency = Sequence[frozenset[int]]
GraphLike = Union[Graph, Sequence[Iterable[int]]]


def adjacency_of(g: GraphLike) -> Adjacency:
    if isinstance(g, Graph):
        return g.adjacency_sets()
    return [frozenset(nb) for nb in g]


def degeneracy_order(adj: Adjacency) -> list[int]:
    """Repeatedly remove a minimum-degree vertex (smallest id on ties)."""
    degree = [len(nb) for nb in adj]
    heap = [(d, v) for v, d in enumerate(degree)]
    heapq.heapify(heap)
    removed = [False] * len(adj)
    order = []
    while heap:
        d, v = heapq.heappop(heap)
        if removed[v] or d != degree[v]:
            continue
        removed[v] = True
        order.append(v)
        for w in adj[v]:
            if not removed[w]:
                degree[w] -= 1
                heapq.heappush(heap, (degree[w], w))
    return order


def maximal_cliques(g: GraphLike, min_size: int = 1) -> Iterator[VertexSet]:
    """Yield every maximal clique with at least ``min_size`` vertices, once each.

    Output order is deterministic: outer vertices follow the degeneracy
    order, the pivot maximises ``|P & N(u)|`` (smallest id on ties), and
    branch vertices are visited in increasing id.
    """
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    adj = adjacency_of(g)
    order = degeneracy_order(adj)
    position = {v: i for i, v in enumerate(order)}

    def expand(r: list[int], p: set[int], x: set[int]) -> Iterator[VertexSet]:
        if not p:
            if not x and len(r) >= min_size:
                yield tuple(sorted(r))
            return
        if len(r) + len(p) < min_size:
            return
        pivot = min(p | x, key=lambda u: (-len(p & adj[u]), u))
        for v in sorted(p - adj[pivot]):
            nb = adj[v]
            r.append(v)
            yield from expand(r, p & nb, x & nb)
            r.pop()
            p.discard(v)
            x.add(v)

    for v in order:
        if len(adj[v]) + 1 < min_size:
            continue
        here = position[v]
        p = {w for w in adj[v] if position[w] > here}
        x = {w for w in adj[v] if position[w] < here}
        yield from expand([v], p, x)


def clique_size_histogram(cliques: Iterable[Sequence[int]]) -> dict[int, int]:
    """Count groups per exact size, keys ascending."""
    counts = Counter(len(c) for c in cliques)
    return dict(sorted(counts.items()))


def cumulative_counts(histogram: dict[int, int], sizes: Iterable[int]) -> dict[int, int]:
    """For each ``s`` in ``sizes``, the number of groups with at least ``s`` members."""
    return {s: sum(c for size, c in histogram.items() if size >= s) for s in sizes}


def is_clique(adj: Adjacency, vertices: Sequence[int]) -> bool:
    vs = list(vertices)
    return all(vs[j] in adj[vs[i]] for i in range(len(vs)) for j in range(i + 1, len(vs)))


def is_maximal_clique(adj: Adjacency, vertices: Sequence[int]) -> bool:
    members = set(vertices)
    if not is_clique(adj, vertices):
        return False
    return not any(w not in members and members <= adj[w] for w in range(len(adj)))
