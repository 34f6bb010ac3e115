"""Compact undirected graph (CSR adjacency) plus edge-list and DOT I/O."""

from __future__ import annotations

from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np


class Graph:
    """Undirected simple graph on vertices ``0..n-1`` with integer edge weights.

    Adjacency is stored as sorted CSR arrays; ``weights`` is aligned with
    ``indices``.  ``labels`` names each vertex for export.
    """

    def __init__(
        self,
        n: int,
        indptr: np.ndarray,
        indices: np.ndarray,
        weights: np.ndarray | None = None,
        labels: Sequence[str] | None = None,
    ) -> None:
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int32)
        if weights is None:
            weights = np.ones(len(self.indices), dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.int64)
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(self.n))
        if len(self.labels) != self.n or len(self.indptr) != self.n + 1:
            raise ValueError("inconsistent graph dimensions")
        self._sets: list[frozenset[int]] | None = None

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        weights: Iterable[int] | None = None,
        labels: Sequence[str] | None = None,
    ) -> "Graph":
        """Build from an edge list; duplicates keep the first weight, self-loops are rejected."""
        edge_list = list(edges)
        w = list(weights) if weights is not None else [1] * len(edge_list)
        if len(w) != len(edge_list):
            raise ValueError("one weight per edge required")
        seen: dict[tuple[int, int], int] = {}
        for (u, v), wt in zip(edge_list, w):
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) outside 0..{n - 1}")
            seen.setdefault((min(u, v), max(u, v)), int(wt))
        if seen:
            arr = np.array(list(seen), dtype=np.int64)
            wt = np.array(list(seen.values()), dtype=np.int64)
        else:
            arr = np.zeros((0, 2), dtype=np.int64)
            wt = np.zeros(0, dtype=np.int64)
        return cls(n, *csr_from_pairs(n, arr[:, 0], arr[:, 1], wt), labels=labels)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def weight(self, u: int, v: int) -> int:
        lo = self.indptr[u]
        nb = self.neighbors(u)
        i = int(np.searchsorted(nb, v))
        if i >= len(nb) or nb[i] != v:
            raise KeyError((u, v))
        return int(self.weights[lo + i])

    def adjacency_sets(self) -> list[frozenset[int]]:
        if self._sets is None:
            ind = self.indices.tolist()
            ptr = self.indptr.tolist()
            self._sets = [frozenset(ind[ptr[v] : ptr[v + 1]]) for v in range(self.n)]
        return self._sets

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Yield ``(u, v, weight)`` with ``u < v`` in CSR order."""
        for u in range(self.n):
            lo, hi = self.indptr[u], self.indptr[u + 1]
            for j in range(lo, hi):
                v = int(self.indices[j])
                if u < v:
                    yield u, v, int(self.weights[j])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(u, v) for u, v, _ in self.edges()}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_sets"] = None
        return state


def csr_from_pairs(n: int, lo, hi, weights) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Symmetric CSR arrays from unique undirected pairs ``lo[i] -- hi[i]``."""
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.int64)
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    wt = np.concatenate([weights, weights])
    order = np.lexsort((dst, src))
    src, dst, wt = src[order], dst[order], wt[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    if n:
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int32), wt


# -- export / import ---------------------------------------------------------


def write_edge_list(graph: Graph, fh: IO[str]) -> None:
    """TSV ``label<TAB>label<TAB>weight``, each row and the row order sorted lexicographically."""
    rows = []
    for u, v, w in graph.edges():
        a, b = sorted((graph.labels[u], graph.labels[v]))
        rows.append((a, b, w))
    rows.sort()
    for a, b, w in rows:
        fh.write(f"{a}\t{b}\t{w}\n")


def read_edge_list(fh: Iterable[str]) -> Graph:
    """Inverse of ``write_edge_list``; vertex ids follow sorted label order."""
    pairs: list[tuple[str, str, int]] = []
    names: set[str] = set()
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ValueError(f"edge list line {lineno}: expected 2 or 3 tab-separated fields")
        w = int(parts[2]) if len(parts) == 3 else 1
        pairs.append((parts[0], parts[1], w))
        names.update(parts[:2])
    labels = sorted(names)
    index = {s: i for i, s in enumerate(labels)}
    return Graph.from_edges(
        len(labels),
        [(index[a], index[b]) for a, b, _ in pairs],
        [w for *_, w in pairs],
        labels=labels,
    )


def _dot_id(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_attrs(attrs: Mapping[str, object]) -> str:
    if not attrs:
        return ""
    body = ", ".join(f"{k}={_dot_id(v)}" for k, v in attrs.items())
    return f" [{body}]"


def write_dot(
    graph: Graph,
    fh: IO[str],
    node_attrs: Mapping[int, Mapping[str, object]] | None = None,
    name: str = "G",
) -> None:
    """Undirected DOT with the edge weight as both ``weight`` and ``label``.

    Nodes and edges are written in sorted label order so output is stable.
    """
    node_attrs = node_attrs or {}
    fh.write(f"graph {_dot_id(name)} {{\n")
    for v in sorted(range(graph.n), key=lambda i: graph.labels[i]):
        fh.write(f"  {_dot_id(graph.labels[v])}{_dot_attrs(node_attrs.get(v, {}))};\n")
    rows = []
    for u, v, w in graph.edges():
        a, b = sorted((graph.labels[u], graph.labels[v]))
        rows.append((a, b, w))
    for a, b, w in sorted(rows):
        fh.write(f"  {_dot_id(a)} -- {_dot_id(b)}{_dot_attrs({'weight': w, 'label': w})};\n")
    fh.write("}\n")
