"""Streaming ingestion of newline-delimited JSON review and user records."""

from __future__ import annotations

import io
import json
import logging
import math
import os
from array import array
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .store import ReviewStore, parse_day

log = logging.getLogger(__name__)

DEFAULT_MAX_SKIP_FRACTION = 0.001


class IngestError(Exception):
    """Fatal ingestion failure (error budget exhausted)."""


@dataclass(frozen=True)
class ReviewSchema:
    """Field names used to pull a review out of one JSON object."""

    user: str = "user_id"
    venue: str = "business_id"
    date: str = "date"
    stars: str = "stars"
    # Accept "YYYY-MM-DD HH:MM:SS" by keeping only the calendar date.
    truncate_time: bool = False


@dataclass(frozen=True)
class UserSchema:
    user: str = "user_id"
    friends: str = "friends"


@dataclass
class IngestReport:
    lines_read: int = 0
    records_kept: int = 0
    duplicates_dropped: int = 0
    lines_skipped: int = 0
    last_error_line: int | None = None
    last_error: str | None = None

    def as_dict(self) -> dict:
        return {
            "lines_read": self.lines_read,
            "records_kept": self.records_kept,
            "duplicates_dropped": self.duplicates_dropped,
            "lines_skipped": self.lines_skipped,
        }


def _lines(source) -> Iterator[bytes | str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            yield from fh
    elif isinstance(source, (bytes, bytearray)):
        yield from io.BytesIO(source)
    else:
        yield from source


class _Budget:
    def __init__(self, report: IngestReport, fraction: float) -> None:
        self.report = report
        self.fraction = fraction

    def skip(self, lineno: int, reason: str) -> None:
        self.report.lines_skipped += 1
        self.report.last_error_line = lineno
        self.report.last_error = reason
        log.debug("line %d skipped: %s", lineno, reason)

    def check(self) -> None:
        r = self.report
        allowed = max(1, math.floor(self.fraction * r.lines_read))
        if r.lines_skipped > allowed:
            raise IngestError(
                f"{r.lines_skipped} of {r.lines_read} lines malformed (budget {allowed}); "
                f"last failure at line {r.last_error_line}: {r.last_error}"
            )


def _as_id(value) -> str:
    if isinstance(value, str) and value:
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    raise ValueError(f"bad id {value!r}")


def _as_stars(value) -> int:
    if value is None:
        return 0
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ValueError(f"bad stars {value!r}")
    if not 1 <= value <= 5:
        raise ValueError(f"stars out of range: {value!r}")
    return int(value)


def ingest_reviews(
    source: str | os.PathLike | IO | Iterable,
    schema: ReviewSchema | None = None,
    max_skip_fraction: float = DEFAULT_MAX_SKIP_FRACTION,
) -> tuple[ReviewStore, IngestReport]:
    """Read review records into a ``ReviewStore``.

    ``source`` may be a path, a binary or text stream, raw bytes, or any
    iterable of lines.  Malformed lines are skipped and counted; if more than
    ``max_skip_fraction`` of the lines read (and at least one) are skipped,
    ``IngestError`` is raised naming the last failing line.
    """
    schema = schema or ReviewSchema()
    report = IngestReport()
    budget = _Budget(report, max_skip_fraction)

    user_index: dict[str, int] = {}
    venue_index: dict[str, int] = {}
    day_cache: dict[str, int] = {}
    users, venues, dates, stars = array("i"), array("i"), array("i"), array("B")

    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        report.lines_read += 1
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            uid = _as_id(obj[schema.user])
            vid = _as_id(obj[schema.venue])
            raw_date = obj[schema.date]
            day = day_cache.get(raw_date) if isinstance(raw_date, str) else None
            if day is None:
                text = raw_date
                if schema.truncate_time and isinstance(text, str) and len(text) > 10 and text[10] in " T":
                    text = text[:10]
                day = parse_day(text)
                day_cache[raw_date] = day
            star = _as_stars(obj.get(schema.stars))
        except (ValueError, KeyError, TypeError) as exc:
            budget.skip(lineno, f"{type(exc).__name__}: {exc}")
            continue
        u = user_index.setdefault(uid, len(user_index))
        v = venue_index.setdefault(vid, len(venue_index))
        users.append(u)
        venues.append(v)
        dates.append(day)
        stars.append(star)

    budget.check()
    store, n_dup = ReviewStore.from_columns(
        list(user_index), list(venue_index), users, venues, dates, stars
    )
    report.duplicates_dropped = n_dup
    report.records_kept = store.n_reviews
    return store, report


def _friend_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        # Yelp's user file encodes friends as "id1, id2" or "None".
        if value.strip() in ("", "None"):
            return []
        return [s.strip() for s in value.split(",") if s.strip()]
    if isinstance(value, list):
        return [_as_id(x) for x in value]
    raise ValueError(f"bad friends field {value!r}")


def ingest_users(
    store: ReviewStore,
    source: str | os.PathLike | IO | Iterable,
    schema: UserSchema | None = None,
    max_skip_fraction: float = DEFAULT_MAX_SKIP_FRACTION,
) -> tuple[ReviewStore, IngestReport]:
    """Attach friend lists to the store's user table.

    Users and friends not yet known are interned on sight, after the
    existing ids.  A user appearing on several lines gets the union of the
    lists; each repeat counts as a dropped duplicate.
    """
    schema = schema or UserSchema()
    report = IngestReport()
    budget = _Budget(report, max_skip_fraction)

    user_ids = list(store.user_ids)
    index = dict(store.user_index())
    if store.has_friends:
        lists: list[set[int]] = [set(store.friends_of(u).tolist()) for u in range(store.n_users)]
    else:
        lists = [set() for _ in range(store.n_users)]
    seen: set[int] = set()

    def intern(uid: str) -> int:
        i = index.get(uid)
        if i is None:
            i = index[uid] = len(user_ids)
            user_ids.append(uid)
            lists.append(set())
        return i

    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        report.lines_read += 1
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            uid = _as_id(obj[schema.user])
            friends = _friend_list(obj.get(schema.friends))
        except (ValueError, KeyError, TypeError) as exc:
            budget.skip(lineno, f"{type(exc).__name__}: {exc}")
            continue
        u = intern(uid)
        if u in seen:
            report.duplicates_dropped += 1
        else:
            seen.add(u)
            report.records_kept += 1
        lists[u].update(intern(f) for f in friends)

    budget.check()
    return store.with_friends(user_ids, [sorted(s) for s in lists]), report
