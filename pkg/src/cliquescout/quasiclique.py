"""Pseudo-clique (edge-density quasi-clique) enumeration by reverse search.

A vertex set ``S`` is a pseudo-clique when the edges of ``G[S]`` make up at
least ``theta`` of the ``|S|(|S|-1)/2`` possible ones.  Removing a vertex
of minimum degree never lowers density, so ``parent(S) = S - {v*}`` (``v*`` a
minimum-degree vertex of ``G[S]``, largest id on ties) is again a
pseudo-clique.  The parent links form a tree rooted at the empty set; a
depth-first walk that only follows ``S -> S + {u}`` when ``S`` is the
parent of ``S + {u}`` therefore visits every pseudo-clique exactly once.

All density tests are integer cross-multiplications against a ``Fraction``
threshold, so boundary cases such as 9/10 at theta = 0.9 are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .clique import Adjacency, GraphLike, VertexSet, adjacency_of, clique_size_histogram


def as_fraction(value) -> Fraction:
    """Exact threshold from a Fraction, int, decimal string, or float (via its repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class QuasiParams:
    theta: Fraction = Fraction(9, 10)
    min_size: int = 2
    max_size: int | None = None

    def __post_init__(self) -> None:
        theta = as_fraction(self.theta)
        object.__setattr__(self, "theta", theta)
        if not 0 < theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {theta}")
        if self.min_size < 2:
            raise ValueError("min_size must be >= 2")
        if self.max_size is not None and self.max_size < self.min_size:
            raise ValueError("max_size must be >= min_size")


def count_edges(adj: Adjacency, vertices: Sequence[int]) -> int:
    vs = list(vertices)
    return sum(1 for i in range(len(vs)) for j in range(i + 1, len(vs)) if vs[j] in adj[vs[i]])


def dense_enough(n_edges: int, size: int, theta: Fraction) -> bool:
    """``n_edges / C(size, 2) >= theta``; sets of size <= 1 count as dense."""
    if size <= 1:
        return True
    return 2 * n_edges * theta.denominator >= theta.numerator * size * (size - 1)


def density(g: GraphLike, vertices: Sequence[int]) -> Fraction:
    size = len(vertices)
    if size <= 1:
        return Fraction(1)
    return Fraction(2 * count_edges(adjacency_of(g), vertices), size * (size - 1))


def _reverse_search(adj: Adjacency, params: QuasiParams, maximal_only: bool) -> Iterator[VertexSet]:
    num, den = params.theta.numerator, params.theta.denominator
    lo, hi = params.min_size, params.max_size
    n = len(adj)
    members: list[int] = []
    in_s: set[int] = set()
    inward: dict[int, int] = {}  # vertex -> neighbours inside S (members included)
    state = {"edges": 0}

    def needed(size: int) -> int:
        # fewest edges into S that keep S + {u} at density >= theta
        return -(-num * size * (size + 1) // (2 * den)) - state["edges"]

    def is_maximal(need: int) -> bool:
        if need <= 0:
            return len(members) == n
        return not any(c >= need for u, c in inward.items() if u not in in_s)

    def is_parent_of_child(u: int, du: int, min_deg: int) -> bool:
        if du < min_deg:
            return True
        if du > min_deg + 1:
            return False
        nb = adj[u]
        for w in members:
            dw = inward.get(w, 0) + (w in nb)
            if dw < du or (dw == du and w > u):
                return False
        return True

    def visit() -> Iterator[VertexSet]:
        size = len(members)
        need = needed(size)
        if size >= lo and (hi is None or size <= hi):
            if not maximal_only or is_maximal(need):
                yield tuple(sorted(members))
        if hi is not None and size >= hi:
            return
        if need <= 0:
            candidates = [u for u in range(n) if u not in in_s]
        else:
            candidates = sorted(u for u, c in inward.items() if c >= need and u not in in_s)
        min_deg = min((inward.get(w, 0) for w in members), default=0)
        for u in candidates:
            du = inward.get(u, 0)
            if size and not is_parent_of_child(u, du, min_deg):
                continue
            members.append(u)
            in_s.add(u)
            state["edges"] += du
            for w in adj[u]:
                inward[w] = inward.get(w, 0) + 1
            yield from visit()
            for w in adj[u]:
                c = inward[w] - 1
                if c:
                    inward[w] = c
                else:
                    del inward[w]
            state["edges"] -= du
            in_s.discard(u)
            members.pop()

    yield from visit()


def pseudo_cliques(g: GraphLike, params: QuasiParams) -> Iterator[VertexSet]:
    """Every vertex set of size in ``[min_size, max_size]`` with density >= theta, once each."""
    return _reverse_search(adjacency_of(g), params, maximal_only=False)


def maximal_pseudo_cliques(g: GraphLike, params: QuasiParams) -> Iterator[VertexSet]:
    """Pseudo-cliques with no single-vertex extension that is still dense enough."""
    return _reverse_search(adjacency_of(g), params, maximal_only=True)


def quasiclique_size_histogram(groups) -> dict[int, int]:
    return clique_size_histogram(groups)
