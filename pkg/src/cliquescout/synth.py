"""Synthetic review streams with planted coordinated groups, and brute-force oracles.

``generate`` emits newline-delimited JSON and feeds it through the real
ingest path, so the returned store is exactly what ``cliquescout ingest``
would build from the same files.
"""

from __future__ import annotations

import dataclasses
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterator

import numpy as np

from .graph import Graph
from .ingest import ingest_reviews, ingest_users
from .store import ReviewStore, format_day, parse_day

ORACLE_MAX_VERTICES = 16


class InfeasibleConfig(ValueError):
    pass


@dataclass(frozen=True)
class PlantedSpec:
    members: int
    venues: int
    spread: int


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_users: int = 1000
    n_venues: int = 200
    background_rate: float = 0.0  # background reviews per user
    start_day: int = parse_day("2012-01-01")
    span_days: int = 365
    planted: tuple[PlantedSpec, ...] = ()
    mean_friends: float = 0.0

    def __post_init__(self) -> None:
        planted = tuple(p if isinstance(p, PlantedSpec) else PlantedSpec(*p) for p in self.planted)
        object.__setattr__(self, "planted", planted)
        if self.n_users < 1 or self.n_venues < 1 or self.span_days < 1:
            raise InfeasibleConfig("n_users, n_venues and span_days must be positive")
        if self.background_rate < 0 or self.mean_friends < 0:
            raise InfeasibleConfig("rates must be non-negative")
        if sum(p.members for p in planted) > self.n_users:
            raise InfeasibleConfig("planted groups need more distinct users than n_users")
        for p in planted:
            if p.members < 2 or p.venues < 1 or p.spread < 0:
                raise InfeasibleConfig(f"bad planted group {p}")
            if p.venues > self.n_venues:
                raise InfeasibleConfig(f"planted group wants {p.venues} venues, only {self.n_venues} exist")
            if p.spread >= self.span_days:
                raise InfeasibleConfig(f"spread {p.spread} does not fit in a {self.span_days}-day span")


@dataclass(frozen=True)
class PlantedGroup:
    members: tuple[str, ...]
    venues: tuple[str, ...]
    spread: int


@dataclass
class SynthData:
    reviews: list[str]
    users: list[str]
    groups: list[PlantedGroup] = field(default_factory=list)


def user_name(i: int) -> str:
    return f"u{i:07d}"


def venue_name(i: int) -> str:
    return f"b{i:06d}"


def synthesize(config: SynthConfig) -> SynthData:
    """Produce review lines, user lines, and the planted ground truth."""
    rng = np.random.default_rng(config.seed)
    cols_u, cols_v, cols_t = [], [], []
    groups = []

    total_members = sum(p.members for p in config.planted)
    chosen = rng.choice(config.n_users, size=total_members, replace=False) if total_members else []
    at = 0
    for p in config.planted:
        members = np.sort(np.asarray(chosen[at : at + p.members]))
        at += p.members
        venues = np.sort(rng.choice(config.n_venues, size=p.venues, replace=False))
        anchors = config.start_day + rng.integers(0, config.span_days - p.spread, size=p.venues)
        offsets = rng.integers(0, p.spread + 1, size=(p.venues, p.members))
        cols_u.append(np.tile(members, p.venues))
        cols_v.append(np.repeat(venues, p.members))
        cols_t.append((anchors[:, None] + offsets).ravel())
        groups.append(
            PlantedGroup(
                tuple(user_name(u) for u in members.tolist()),
                tuple(venue_name(v) for v in venues.tolist()),
                p.spread,
            )
        )

    n_bg = int(round(config.background_rate * config.n_users))
    cols_u.append(rng.integers(0, config.n_users, size=n_bg))
    cols_v.append(rng.integers(0, config.n_venues, size=n_bg))
    cols_t.append(config.start_day + rng.integers(0, config.span_days, size=n_bg))

    users = np.concatenate(cols_u).astype(np.int64)
    venues = np.concatenate(cols_v).astype(np.int64)
    dates = np.concatenate(cols_t).astype(np.int64)
    stars = rng.integers(1, 6, size=len(users))
    order = rng.permutation(len(users))

    day_text: dict[int, str] = {}
    reviews = []
    for i in order.tolist():
        t = int(dates[i])
        ds = day_text.get(t)
        if ds is None:
            ds = day_text[t] = format_day(t)
        reviews.append(
            f'{{"user_id": "{user_name(int(users[i]))}", "business_id": "{venue_name(int(venues[i]))}", '
            f'"date": "{ds}", "stars": {int(stars[i])}}}\n'
        )

    user_lines = []
    if config.mean_friends > 0:
        n_friends = rng.poisson(config.mean_friends, size=config.n_users)
        for u in range(config.n_users):
            picks = rng.integers(0, config.n_users, size=int(n_friends[u]))
            friends = sorted({int(f) for f in picks.tolist() if f != u})
            user_lines.append(json.dumps({"user_id": user_name(u), "friends": [user_name(f) for f in friends]}) + "\n")
    return SynthData(reviews, user_lines, groups)


def generate(config: SynthConfig) -> tuple[ReviewStore, list[PlantedGroup]]:
    data = synthesize(config)
    store, _ = ingest_reviews(iter(data.reviews))
    if data.users:
        store, _ = ingest_users(store, iter(data.users))
    return store, data.groups


def ground_truth_json(config: SynthConfig, groups: list[PlantedGroup]) -> str:
    payload = {
        "config": dataclasses.asdict(config),
        "groups": [dataclasses.asdict(g) for g in groups],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_synth(config: SynthConfig, reviews: IO[str], users: IO[str] | None = None, truth: IO[str] | None = None) -> SynthData:
    data = synthesize(config)
    reviews.writelines(data.reviews)
    if users is not None:
        users.writelines(data.users)
    if truth is not None:
        truth.write(ground_truth_json(config, data.groups))
    return data


# -- brute-force oracles -------------------------------------------------------


def _bitmasks(g) -> list[int]:
    if isinstance(g, Graph):
        rows = [g.neighbors(v).tolist() for v in range(g.n)]
    else:
        rows = [list(nb) for nb in g]
    if len(rows) > ORACLE_MAX_VERTICES:
        raise ValueError(f"oracle refuses graphs with more than {ORACLE_MAX_VERTICES} vertices (got {len(rows)})")
    masks = []
    for nb in rows:
        m = 0
        for w in nb:
            m |= 1 << w
        masks.append(m)
    return masks


def _members(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def _subsets(n: int) -> Iterator[int]:
    return iter(range(1, 1 << n))


def oracle_maximal_cliques(g, min_size: int = 1) -> set[tuple[int, ...]]:
    """All maximal cliques of size >= min_size by scanning every vertex subset."""
    masks = _bitmasks(g)
    n = len(masks)

    def complete(s: int) -> bool:
        return all(not (s >> v & 1) or (s & ~(masks[v] | 1 << v)) == 0 for v in range(n))

    cliques = [s for s in _subsets(n) if complete(s)]
    clique_set = set(cliques)
    out = set()
    for s in cliques:
        if bin(s).count("1") < min_size:
            continue
        if any((s | 1 << w) in clique_set for w in range(n) if not s >> w & 1):
            continue
        out.add(_members(s))
    return out


def _dense(masks: list[int], s: int, theta: Fraction) -> bool:
    size = bin(s).count("1")
    if size <= 1:
        return True
    edges = sum(bin(masks[v] & s).count("1") for v in range(len(masks)) if s >> v & 1) // 2
    return Fraction(edges, size * (size - 1) // 2) >= theta


def oracle_pseudo_cliques(g, theta, min_size: int = 2, max_size: int | None = None, maximal: bool = False) -> set[tuple[int, ...]]:
    """Every subset with density >= theta and size in range; ``maximal`` keeps those with no dense 1-extension."""
    theta = Fraction(theta) if not isinstance(theta, float) else Fraction(repr(theta))
    masks = _bitmasks(g)
    n = len(masks)
    dense = {s for s in _subsets(n) if _dense(masks, s, theta)}
    out = set()
    for s in dense:
        size = bin(s).count("1")
        if size < min_size or (max_size is not None and size > max_size):
            continue
        if maximal and any((s | 1 << w) in dense for w in range(n) if not s >> w & 1):
            continue
        out.add(_members(s))
    return out


def random_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


def planted_quasiclique_graph(
    n: int, planted: int, missing: int, background_p: float, rng: np.random.Generator
) -> tuple[Graph, tuple[int, ...]]:
    """Sparse random graph plus a ``planted``-vertex complete block with ``missing`` edges removed."""
    members = tuple(sorted(rng.choice(n, size=planted, replace=False).tolist()))
    inside = [(members[i], members[j]) for i in range(planted) for j in range(i + 1, planted)]
    drop = set(rng.choice(len(inside), size=missing, replace=False).tolist()) if missing else set()
    edges = [e for i, e in enumerate(inside) if i not in drop]
    mset = set(members)
    for u in range(n):
        for v in range(u + 1, n):
            if (u in mset and v in mset) or rng.random() >= background_p:
                continue
            edges.append((u, v))
    return Graph.from_edges(n, edges), members


def as_ndjson_bytes(lines: list[str]) -> io.BytesIO:
    return io.BytesIO("".join(lines).encode("utf-8"))
