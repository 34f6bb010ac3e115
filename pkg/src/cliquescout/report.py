"""Count tables, flagged-group evidence, label statistics and group-graph exports."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .clique import clique_size_histogram, maximal_cliques
from .graph import Graph, write_dot, write_edge_list
from .kdgraph import (
    DEFAULT_PAIR_BUDGET,
    ConfigurationError,
    KDGraph,
    KDParams,
    WeightMode,
    build_kd_graph,
    kd_parameter_sweep,
    qualifying_evidence,
)
from .quasiclique import QuasiParams, as_fraction, dense_enough, maximal_pseudo_cliques
from .store import ReviewStore, format_day, parse_day

log = logging.getLogger(__name__)

CLIQUE = "clique"
QUASICLIQUE = "quasiclique"
KINDS = (CLIQUE, QUASICLIQUE)
EVIDENCE_CAP = 50
DEFAULT_THETA = Fraction(9, 10)


# -- count tables ----------------------------------------------------------------


@dataclass
class CountTable:
    """(k, d) x group-size counts.

    ``exact[(k, d, s)]`` counts maximal groups of exactly ``s`` members;
    ``at_least[(k, d, s)]`` counts maximal groups of ``s`` or more.
    Every requested cell is present, zeros included.
    """

    kind: str
    params: list[tuple[int, int]]
    sizes: list[int]
    exact: dict[tuple[int, int, int], int]
    at_least: dict[tuple[int, int, int], int]
    theta: Fraction | None = None
    largest: dict[tuple[int, int], int] = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CountTable):
            return NotImplemented
        return (self.params, self.sizes, self.exact, self.at_least) == (
            other.params,
            other.sizes,
            other.exact,
            other.at_least,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "d", "size", "count"])
        for k, d in self.params:
            for s in self.sizes:
                w.writerow([k, d, s, self.exact[(k, d, s)]])
        return buf.getvalue()

    def cumulative_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "d", "min_size", "count"])
        for k, d in self.params:
            for s in self.sizes:
                w.writerow([k, d, s, self.at_least[(k, d, s)]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, exact_text: str, cumulative_text: str, kind: str = CLIQUE, theta=None) -> "CountTable":
        def rows(text, size_col):
            out = {}
            for row in csv.DictReader(io.StringIO(text)):
                out[(int(row["k"]), int(row["d"]), int(row[size_col]))] = int(row["count"])
            return out

        exact = rows(exact_text, "size")
        at_least = rows(cumulative_text, "min_size")
        params = list(dict.fromkeys((k, d) for k, d, _ in exact))
        sizes = list(dict.fromkeys(s for _, _, s in exact))
        return cls(kind, params, sizes, exact, at_least, as_fraction(theta) if theta is not None else None)

    def render(self) -> str:
        """Aligned text table: one row per group size, one column per (k, d) graph."""
        label = "clique" if self.kind == CLIQUE else "quasiclique"
        head = ["(k, d)-graph"] + [f"{k},{d}" for k, d in self.params]
        body = [[f"{s}-{label}"] + [str(self.exact[(k, d, s)]) for k, d in self.params] for s in self.sizes]
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]

        def line(cells):
            return "  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(cells))

        title = f"maximal {label}s per exact size"
        if self.theta is not None:
            title += f" (theta = {self.theta})"
        return "\n".join([title, line(head)] + [line(r) for r in body]) + "\n"


def enumerate_groups(graph: Graph, kind: str, min_size: int, theta=None):
    if kind == CLIQUE:
        return maximal_cliques(graph, min_size=min_size)
    if kind == QUASICLIQUE:
        params = QuasiParams(theta if theta is not None else DEFAULT_THETA, min_size=max(2, min_size))
        return maximal_pseudo_cliques(graph, params)
    raise ValueError(f"unknown kind {kind!r} (choose from {', '.join(KINDS)})")


def _count_cell(args) -> tuple[tuple[int, int], dict[int, int]]:
    key, graph, kind, min_size, theta = args
    return key, clique_size_histogram(enumerate_groups(graph, kind, min_size, theta))


def count_table_from_graphs(
    graphs: Mapping[tuple[int, int], Graph],
    sizes: Sequence[int],
    kind: str = CLIQUE,
    theta=None,
    workers: int = 1,
) -> CountTable:
    sizes = sorted(set(sizes))
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if kind == QUASICLIQUE:
        theta = as_fraction(theta if theta is not None else DEFAULT_THETA)
    params = sorted(graphs)
    jobs = [(key, graphs[key], kind, sizes[0], theta) for key in params]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_count_cell, jobs))
    else:
        results = dict(map(_count_cell, jobs))

    exact, at_least, largest = {}, {}, {}
    for k, d in params:
        hist = results[(k, d)]
        largest[(k, d)] = max(hist, default=0)
        for s in sizes:
            exact[(k, d, s)] = hist.get(s, 0)
            at_least[(k, d, s)] = sum(c for size, c in hist.items() if size >= s)
    return CountTable(kind, params, sizes, exact, at_least, theta if kind == QUASICLIQUE else None, largest)


def build_count_table(
    store: ReviewStore,
    k_list: Iterable[int],
    d_list: Iterable[int],
    sizes: Sequence[int],
    kind: str = CLIQUE,
    theta=None,
    workers: int = 1,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
) -> CountTable:
    graphs = kd_parameter_sweep(store, k_list, d_list, WeightMode.UNWEIGHTED, pair_budget=pair_budget, threads=workers)
    return count_table_from_graphs(graphs, sizes, kind, theta, workers)


def _user_pair_keys(graph: KDGraph, n_users: int) -> np.ndarray:
    lo, hi = [], []
    for u, v, _ in graph.edges():
        a, b = int(graph.users[u]), int(graph.users[v])
        lo.append(min(a, b))
        hi.append(max(a, b))
    return np.sort(np.asarray(lo, dtype=np.int64) * n_users + np.asarray(hi, dtype=np.int64))


def sweep_violations(graphs: Mapping[tuple[int, int], KDGraph], n_users: int) -> list[str]:
    """Edge-set inclusions along each grid axis: E(k,d) within E(k',d) for k' < k, and within E(k,d') for d' > d."""
    keys = {p: _user_pair_keys(g, n_users) for p, g in graphs.items()}
    ks = sorted({k for k, _ in graphs})
    ds = sorted({d for _, d in graphs})
    problems = []
    for (k, d), e in keys.items():
        i, j = ks.index(k), ds.index(d)
        if i > 0 and (ks[i - 1], d) in keys and not np.isin(e, keys[(ks[i - 1], d)]).all():
            problems.append(f"E({k},{d}) is not a subset of E({ks[i - 1]},{d})")
        if j + 1 < len(ds) and (k, ds[j + 1]) in keys and not np.isin(e, keys[(k, ds[j + 1])]).all():
            problems.append(f"E({k},{d}) is not a subset of E({k},{ds[j + 1]})")
    return problems


def table_violations(table: CountTable) -> list[str]:
    """Checks that edge inclusion really implies for a table.

    Clique counts themselves need not be monotone (a new edge can merge two
    maximal cliques), but the largest clique can only grow with d and
    shrink with k, so "some group of size >= s exists" is monotone too.
    """
    if table.kind != CLIQUE:
        return []
    ks = sorted({k for k, _ in table.params})
    ds = sorted({d for _, d in table.params})
    big = table.largest
    problems = []
    for k, d in table.params:
        i, j = ks.index(k), ds.index(d)
        if i > 0 and (ks[i - 1], d) in big and big[(k, d)] > big[(ks[i - 1], d)]:
            problems.append(f"largest clique of ({k},{d}) exceeds that of ({ks[i - 1]},{d})")
        if j + 1 < len(ds) and (k, ds[j + 1]) in big and big[(k, d)] > big[(k, ds[j + 1])]:
            problems.append(f"largest clique of ({k},{d}) exceeds that of ({k},{ds[j + 1]})")
        for s in table.sizes:
            here = table.at_least[(k, d, s)] > 0
            if i > 0 and (ks[i - 1], d, s) in table.at_least and here and not table.at_least[(ks[i - 1], d, s)]:
                problems.append(f"({k},{d}) has a group of size >= {s} but ({ks[i - 1]},{d}) has none")
            if j + 1 < len(ds) and (k, ds[j + 1], s) in table.at_least and here and not table.at_least[(k, ds[j + 1], s)]:
                problems.append(f"({k},{d}) has a group of size >= {s} but ({k},{ds[j + 1]}) has none")
    return problems


# -- flagged groups --------------------------------------------------------------


def group_record(
    store: ReviewStore,
    user_members: Sequence[int],
    params: KDParams,
    kind: str,
    theta=None,
    full_evidence: bool = False,
) -> dict:
    """Evidence listing for one group of store users."""
    members = sorted(user_members, key=lambda u: store.user_ids[u])
    pairs = []
    n_edges = 0
    for i, u in enumerate(members):
        for v in members[i + 1 :]:
            evidence = qualifying_evidence(store, u, v, params.d)
            if len(evidence) < params.k:
                continue
            n_edges += 1
            shown = evidence if full_evidence else evidence[:EVIDENCE_CAP]
            pairs.append(
                {
                    "u": store.user_ids[u],
                    "v": store.user_ids[v],
                    "count": len(evidence),
                    "venues": [
                        {"venue": store.venue_ids[x], "date_u": format_day(du), "date_v": format_day(dv)}
                        for x, du, dv in shown
                    ],
                    "truncated": len(shown) < len(evidence),
                }
            )
    size = len(members)
    dens = Fraction(2 * n_edges, size * (size - 1)) if size > 1 else Fraction(1)
    record = {
        "kind": kind,
        "k": params.k,
        "d": params.d,
        "size": size,
        "members": [store.user_ids[u] for u in members],
        "density": str(dens),
        "pairs": pairs,
    }
    if kind == QUASICLIQUE:
        record["theta"] = str(as_fraction(theta if theta is not None else DEFAULT_THETA))
    return record


def flag_groups(
    store: ReviewStore,
    params: KDParams,
    kind: str = CLIQUE,
    min_size: int = 3,
    theta=None,
    graph: KDGraph | None = None,
    full_evidence: bool = False,
) -> list[dict]:
    """List every maximal group of at least ``min_size`` with its pairwise evidence.

    Records are sorted by descending size, then by member ids.
    """
    if graph is None:
        graph = build_kd_graph(store, params)
    records = []
    for group in enumerate_groups(graph, kind, min_size, theta):
        users = [int(graph.users[v]) for v in group]
        records.append(group_record(store, users, params, kind, theta, full_evidence))
    records.sort(key=lambda r: (-r["size"], r["members"]))
    return records


def write_jsonl(records: Iterable[dict], fh: IO[str]) -> None:
    for r in records:
        fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_jsonl(fh: Iterable[str]) -> list[dict]:
    return [json.loads(line) for line in fh if line.strip()]


def validate_groups(store: ReviewStore, records: Iterable[dict]) -> list[str]:
    """Re-check every listed evidence item against the store; returns problems found."""
    uidx = store.user_index()
    vidx = store.venue_index()
    problems = []
    for n, rec in enumerate(records, start=1):
        k, d = rec["k"], rec["d"]
        where = f"group {n}"
        members = rec["members"]
        missing = [m for m in members if m not in uidx]
        if missing:
            problems.append(f"{where}: unknown users {missing}")
            continue
        listed = set()
        for pair in rec["pairs"]:
            u, v = uidx.get(pair["u"]), uidx.get(pair["v"])
            if u is None or v is None or pair["u"] not in members or pair["v"] not in members:
                problems.append(f"{where}: pair {pair['u']}/{pair['v']} is not inside the group")
                continue
            listed.add(frozenset((pair["u"], pair["v"])))
            ru, rv = store.user_reviews(u), store.user_reviews(v)
            for item in pair["venues"]:
                x = vidx.get(item["venue"])
                du, dv = parse_day(item["date_u"]), parse_day(item["date_v"])
                if x is None or du not in ru.get(x, ()) or dv not in rv.get(x, ()):
                    problems.append(f"{where}: no such reviews for {pair['u']}/{pair['v']} at {item['venue']}")
                elif abs(du - dv) > d:
                    problems.append(f"{where}: {pair['u']}/{pair['v']} at {item['venue']} are {abs(du - dv)} days apart")
            if len({i["venue"] for i in pair["venues"]}) != len(pair["venues"]):
                problems.append(f"{where}: venue listed twice for {pair['u']}/{pair['v']}")
            if pair["count"] < k or (not pair.get("truncated") and len(pair["venues"]) != pair["count"]):
                problems.append(f"{where}: {pair['u']}/{pair['v']} lists {len(pair['venues'])} venues, count {pair['count']}, k={k}")
            elif len(pair["venues"]) < min(k, EVIDENCE_CAP):
                problems.append(f"{where}: {pair['u']}/{pair['v']} shows fewer than k venues")
        size = len(members)
        if rec["kind"] == CLIQUE and len(listed) != size * (size - 1) // 2:
            problems.append(f"{where}: clique lists {len(listed)} of {size * (size - 1) // 2} pairs")
        if rec["kind"] == QUASICLIQUE and not dense_enough(len(listed), size, as_fraction(rec.get("theta", DEFAULT_THETA))):
            problems.append(f"{where}: listed pairs give density below theta")
    return problems


# -- labels ---------------------------------------------------------------------


class LabelFileError(Exception):
    pass


@dataclass
class LabelFile:
    labels: dict[str, str]

    @classmethod
    def read(cls, path) -> "LabelFile":
        """Two tab- or comma-separated columns, ``user_id`` and ``label``; ``#`` starts a comment."""
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise LabelFileError(f"cannot read label file {path}: {exc}") from exc
        return cls.parse(lines)

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "LabelFile":
        labels: dict[str, str] = {}
        for n, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split(",")
            if len(parts) != 2:
                raise LabelFileError(f"label file line {n}: expected user_id and label")
            uid, label = parts[0].strip(), parts[1].strip()
            if uid in labels and labels[uid] != label:
                raise LabelFileError(f"label file line {n}: user {uid} labelled both {labels[uid]!r} and {label!r}")
            labels[uid] = label
        return cls(labels)


@dataclass
class AnnotationStats:
    flagged_users: int
    fractions: dict[str, float]
    groups: list[dict]
    graph_users: int | None = None
    graph_fractions: dict[str, float] | None = None
    unknown_label_users: int = 0

    def fraction(self, label: str) -> float:
        return self.fractions.get(label, 0.0)

    def as_dict(self) -> dict:
        out = {
            "flagged_users": self.flagged_users,
            "fractions": self.fractions,
            "groups": self.groups,
            "unknown_label_users": self.unknown_label_users,
        }
        if self.graph_users is not None:
            out["graph_users"] = self.graph_users
            out["graph_fractions"] = self.graph_fractions
        return out


def _fractions(users: set[str], labels: Mapping[str, str], all_labels: Iterable[str]) -> dict[str, float]:
    counts = Counter(labels[u] for u in users if u in labels)
    n = len(users)
    return {lab: (counts[lab] / n if n else 0.0) for lab in sorted(all_labels)}


def annotate(
    groups: Iterable[dict],
    labels: LabelFile,
    store: ReviewStore | None = None,
    graph_users: Iterable[str] | None = None,
) -> AnnotationStats:
    """Label composition of flagged users, overall and per group.

    With ``graph_users`` the same fractions are also reported over every
    vertex of the graph.  With ``store``, labelled users the store has never
    seen are ignored and counted in ``unknown_label_users``.
    """
    known = dict(labels.labels)
    unknown = 0
    if store is not None:
        index = store.user_index()
        unknown = sum(1 for u in known if u not in index)
        known = {u: lab for u, lab in known.items() if u in index}
        if unknown:
            log.warning("%d labelled users are not in the store", unknown)
    all_labels = set(known.values())

    per_group = []
    flagged: set[str] = set()
    for g in groups:
        members = list(g["members"])
        flagged.update(members)
        comp = Counter(known[m] for m in members if m in known)
        per_group.append(
            {
                "members": len(members),
                "labels": dict(sorted(comp.items())),
                "unlabelled": len(members) - sum(comp.values()),
            }
        )
    stats = AnnotationStats(len(flagged), _fractions(flagged, known, all_labels), per_group, unknown_label_users=unknown)
    if graph_users is not None:
        population = set(graph_users)
        stats.graph_users = len(population)
        stats.graph_fractions = _fractions(population, known, all_labels)
    return stats


# -- group graph export ----------------------------------------------------------


def group_graph(store: ReviewStore, groups: Iterable[dict], mode: WeightMode = WeightMode.UNWEIGHTED) -> Graph:
    """Union of the groups' induced (k, d) subgraphs, weighted per ``mode``.

    Each group is judged at its own ``k`` and ``d``; vertices are labelled
    with external user ids.
    """
    mode = WeightMode.parse(mode)
    if mode is WeightMode.FRIEND_INTERSECTION and not store.has_friends:
        raise ConfigurationError("friend_intersection weights need a store with friend lists")
    uidx = store.user_index()
    users: dict[int, None] = {}
    weights: dict[tuple[int, int], int] = {}
    for g in groups:
        members = sorted(uidx[m] for m in g["members"])
        for u in members:
            users.setdefault(u)
        for i, u in enumerate(members):
            for v in members[i + 1 :]:
                if (u, v) in weights:
                    continue
                n_common = len(qualifying_evidence(store, u, v, g["d"]))
                if n_common < g["k"]:
                    continue
                if mode is WeightMode.CO_REVIEW_COUNT:
                    w = n_common
                elif mode is WeightMode.FRIEND_INTERSECTION:
                    w = len(np.intersect1d(store.friends_of(u), store.friends_of(v), assume_unique=True))
                else:
                    w = 1
                weights[(u, v)] = w
    order = sorted(users, key=lambda u: store.user_ids[u])
    local = {u: i for i, u in enumerate(order)}
    graph = Graph.from_edges(
        len(order),
        [(local[u], local[v]) for u, v in weights],
        list(weights.values()),
        labels=[store.user_ids[u] for u in order],
    )
    graph.store_users = order  # type: ignore[attr-defined]
    return graph


def export_group_graph(
    store: ReviewStore,
    groups: Iterable[dict],
    fh: IO[str],
    mode: WeightMode = WeightMode.UNWEIGHTED,
    fmt: str = "dot",
    labels: LabelFile | None = None,
) -> Graph:
    """Write the combined group graph as DOT (node review counts and labels) or TSV."""
    graph = group_graph(store, groups, mode)
    if fmt == "tsv":
        write_edge_list(graph, fh)
    elif fmt == "dot":
        counts = store.review_counts()
        tags = labels.labels if labels else {}
        attrs = {}
        for i, u in enumerate(graph.store_users):  # type: ignore[attr-defined]
            a = {"reviews": int(counts[u])}
            tag = tags.get(store.user_ids[u])
            if tag:
                a["user_label"] = tag
            attrs[i] = a
        write_dot(graph, fh, attrs)
    else:
        raise ValueError(f"unknown export format {fmt!r} (dot or tsv)")
    return graph
