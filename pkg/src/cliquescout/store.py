"""Venue-grouped column store of reviews and its on-disk format.

Reviews live in three parallel columns (user, date, stars) ordered by venue,
then date, then user.  ``venue_offsets`` delimits each venue's slice, so the
reviews of venue ``v`` are ``user[venue_offsets[v]:venue_offsets[v + 1]]``.

The binary layout is described in ``docs/store_format.md``.
"""

from __future__ import annotations

import datetime as _dt
import io
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, Sequence

import numpy as np

MAGIC = b"CSCT"
TRAILER = b"TCSC"
FORMAT_VERSION = 1

_EPOCH_ORDINAL = _dt.date(1970, 1, 1).toordinal()
_HEADER = struct.Struct("<4sHHIIQQ")
_FLAG_FRIENDS = 0x1


class StoreFormatError(Exception):
    """Raised when a store file cannot be decoded."""


def parse_day(text: str) -> int:
    """Convert an exact ``YYYY-MM-DD`` string to days since 1970-01-01."""
    if not isinstance(text, str) or len(text) != 10 or text[4] != "-" or text[7] != "-":
        raise ValueError(f"not a YYYY-MM-DD date: {text!r}")
    return _dt.date.fromisoformat(text).toordinal() - _EPOCH_ORDINAL


def format_day(day: int) -> str:
    return _dt.date.fromordinal(int(day) + _EPOCH_ORDINAL).isoformat()


@dataclass(frozen=True)
class Review:
    user: int
    venue: int
    date: int
    stars: int | None = None


@dataclass(frozen=True, eq=False)
class ReviewStore:
    """Immutable, deduplicated review columns with interned user/venue ids."""

    user_ids: tuple[str, ...]
    venue_ids: tuple[str, ...]
    venue_offsets: np.ndarray  # int64, n_venues + 1
    user: np.ndarray  # int32
    date: np.ndarray  # int32, day numbers
    stars: np.ndarray  # uint8, 0 = missing
    friend_offsets: np.ndarray | None = None  # int64, n_users + 1
    friends: np.ndarray | None = None  # int32
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- construction -----------------------------------------------------

    @classmethod
    def empty(cls) -> "ReviewStore":
        return cls.from_columns([], [], [], [], [], [])[0]

    @classmethod
    def from_columns(
        cls,
        user_ids: Sequence[str],
        venue_ids: Sequence[str],
        users,
        venues,
        dates,
        stars,
        friend_lists: Sequence[Sequence[int]] | None = None,
    ) -> tuple["ReviewStore", int]:
        """Build a store from raw (possibly duplicated, unsorted) columns.

        Returns the store and the number of exact duplicate
        ``(user, venue, date)`` triples dropped.  The first occurrence of a
        duplicate wins, which only matters for its star rating.
        """
        users = np.asarray(users, dtype=np.int32)
        venues = np.asarray(venues, dtype=np.int32)
        dates = np.asarray(dates, dtype=np.int32)
        stars = np.asarray(stars, dtype=np.uint8)
        n = len(users)
        if not (len(venues) == len(dates) == len(stars) == n):
            raise ValueError("review columns differ in length")

        if n:
            order = np.lexsort((np.arange(n), dates, venues, users))
            u, v, t = users[order], venues[order], dates[order]
            dup = np.zeros(n, dtype=bool)
            dup[1:] = (u[1:] == u[:-1]) & (v[1:] == v[:-1]) & (t[1:] == t[:-1])
            kept = order[~dup]
            n_dup = int(dup.sum())
            users, venues, dates, stars = users[kept], venues[kept], dates[kept], stars[kept]
            order = np.lexsort((users, dates, venues))
            users, venues, dates, stars = users[order], venues[order], dates[order], stars[order]
        else:
            n_dup = 0

        n_venues = len(venue_ids)
        counts = np.bincount(venues, minlength=n_venues) if n_venues else np.zeros(0, np.int64)
        offsets = np.zeros(n_venues + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])

        f_off = f_idx = None
        if friend_lists is not None:
            f_off, f_idx = _pack_friend_lists(friend_lists, len(user_ids))

        store = cls(
            user_ids=tuple(user_ids),
            venue_ids=tuple(venue_ids),
            venue_offsets=offsets,
            user=users,
            date=dates,
            stars=stars,
            friend_offsets=f_off,
            friends=f_idx,
        )
        return store, n_dup

    def with_friends(self, user_ids: Sequence[str], friend_lists: Sequence[Sequence[int]]) -> "ReviewStore":
        """Return a copy with an extended user table and attached friend lists."""
        if tuple(user_ids[: self.n_users]) != self.user_ids:
            raise ValueError("user table may only be extended, not reordered")
        f_off, f_idx = _pack_friend_lists(friend_lists, len(user_ids))
        return ReviewStore(
            user_ids=tuple(user_ids),
            venue_ids=self.venue_ids,
            venue_offsets=self.venue_offsets,
            user=self.user,
            date=self.date,
            stars=self.stars,
            friend_offsets=f_off,
            friends=f_idx,
        )

    # -- accessors --------------------------------------------------------

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_venues(self) -> int:
        return len(self.venue_ids)

    @property
    def n_reviews(self) -> int:
        return len(self.user)

    @property
    def has_friends(self) -> bool:
        return self.friend_offsets is not None

    def user_index(self) -> dict[str, int]:
        if "user_index" not in self._cache:
            self._cache["user_index"] = {s: i for i, s in enumerate(self.user_ids)}
        return self._cache["user_index"]

    def venue_index(self) -> dict[str, int]:
        if "venue_index" not in self._cache:
            self._cache["venue_index"] = {s: i for i, s in enumerate(self.venue_ids)}
        return self._cache["venue_index"]

    def review_venues(self) -> np.ndarray:
        """Venue id of every review row."""
        if "review_venues" not in self._cache:
            self._cache["review_venues"] = np.repeat(
                np.arange(self.n_venues, dtype=np.int32), np.diff(self.venue_offsets)
            )
        return self._cache["review_venues"]

    def venue_group(self, venue: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.venue_offsets[venue], self.venue_offsets[venue + 1]
        return self.user[lo:hi], self.date[lo:hi]

    def user_reviews(self, user: int) -> dict[int, list[int]]:
        """Map venue -> sorted review dates for one user."""
        if "by_user" not in self._cache:
            order = np.argsort(self.user, kind="stable")
            offsets = np.zeros(self.n_users + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.user, minlength=self.n_users), out=offsets[1:])
            self._cache["by_user"] = (order, offsets)
        order, offsets = self._cache["by_user"]
        if not 0 <= user < self.n_users:
            return {}
        rows = order[offsets[user] : offsets[user + 1]]
        venues = self.review_venues()
        out: dict[int, list[int]] = {}
        for r in rows:
            out.setdefault(int(venues[r]), []).append(int(self.date[r]))
        for dates in out.values():
            dates.sort()
        return out

    def review_counts(self) -> np.ndarray:
        """Number of reviews per user."""
        return np.bincount(self.user, minlength=self.n_users)

    def friends_of(self, user: int) -> np.ndarray:
        if self.friend_offsets is None:
            raise ValueError("store has no friend table")
        return self.friends[self.friend_offsets[user] : self.friend_offsets[user + 1]]

    def reviews(self) -> Iterator[Review]:
        venues = self.review_venues()
        for i in range(self.n_reviews):
            s = int(self.stars[i])
            yield Review(int(self.user[i]), int(venues[i]), int(self.date[i]), s or None)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReviewStore):
            return NotImplemented
        if (self.user_ids, self.venue_ids) != (other.user_ids, other.venue_ids):
            return False
        arrays = ("venue_offsets", "user", "date", "stars")
        if not all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays):
            return False
        if self.has_friends != other.has_friends:
            return False
        if self.has_friends:
            return np.array_equal(self.friend_offsets, other.friend_offsets) and np.array_equal(
                self.friends, other.friends
            )
        return True

    __hash__ = None  # type: ignore[assignment]


def _pack_friend_lists(friend_lists: Sequence[Sequence[int]], n_users: int) -> tuple[np.ndarray, np.ndarray]:
    if len(friend_lists) != n_users:
        raise ValueError("need one friend list per user")
    cleaned = [np.unique(np.asarray(f, dtype=np.int32)) for f in friend_lists]
    offsets = np.zeros(n_users + 1, dtype=np.int64)
    np.cumsum([len(f) for f in cleaned], out=offsets[1:])
    flat = np.concatenate(cleaned).astype(np.int32) if cleaned else np.zeros(0, np.int32)
    return offsets, flat


# -- persistence -------------------------------------------------------------


def _write_strings(fh: BinaryIO, strings: Sequence[str]) -> None:
    encoded = [s.encode("utf-8") for s in strings]
    offsets = np.zeros(len(encoded) + 1, dtype="<u8")
    np.cumsum([len(b) for b in encoded], out=offsets[1:])
    fh.write(struct.pack("<Q", int(offsets[-1])))
    fh.write(offsets.tobytes())
    fh.write(b"".join(encoded))


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise StoreFormatError(f"truncated store file while reading {what}")
    return buf


def _read_array(fh: BinaryIO, dtype: str, count: int, what: str) -> np.ndarray:
    dt = np.dtype(dtype)
    return np.frombuffer(_read_exact(fh, dt.itemsize * count, what), dtype=dt).copy()


def _read_strings(fh: BinaryIO, count: int, what: str) -> tuple[str, ...]:
    (blob_len,) = struct.unpack("<Q", _read_exact(fh, 8, what))
    offsets = _read_array(fh, "<u8", count + 1, what)
    blob = _read_exact(fh, blob_len, what)
    if offsets[-1] != blob_len:
        raise StoreFormatError(f"corrupt string table: {what}")
    return tuple(blob[offsets[i] : offsets[i + 1]].decode("utf-8") for i in range(count))


def write_store(store: ReviewStore, fh: BinaryIO) -> None:
    flags = _FLAG_FRIENDS if store.has_friends else 0
    n_friend = len(store.friends) if store.has_friends else 0
    fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, flags, store.n_users, store.n_venues, store.n_reviews, n_friend))
    _write_strings(fh, store.user_ids)
    _write_strings(fh, store.venue_ids)
    fh.write(store.venue_offsets.astype("<u8").tobytes())
    fh.write(store.user.astype("<u4").tobytes())
    fh.write(store.date.astype("<i4").tobytes())
    fh.write(store.stars.astype("u1").tobytes())
    if store.has_friends:
        fh.write(store.friend_offsets.astype("<u8").tobytes())
        fh.write(store.friends.astype("<u4").tobytes())
    fh.write(TRAILER)


def read_store(fh: BinaryIO) -> ReviewStore:
    head = fh.read(_HEADER.size)
    if len(head) >= 4 and head[:4] != MAGIC:
        raise StoreFormatError("not a store file (bad magic bytes)")
    if len(head) != _HEADER.size:
        raise StoreFormatError("truncated store file while reading header")
    _, version, flags, n_users, n_venues, n_reviews, n_friend = _HEADER.unpack(head)
    if version != FORMAT_VERSION:
        raise StoreFormatError(
            f"store format version {version} is not supported (this build reads version {FORMAT_VERSION})"
        )
    user_ids = _read_strings(fh, n_users, "user table")
    venue_ids = _read_strings(fh, n_venues, "venue table")
    venue_offsets = _read_array(fh, "<u8", n_venues + 1, "venue offsets").astype(np.int64)
    user = _read_array(fh, "<u4", n_reviews, "review users").astype(np.int32)
    date = _read_array(fh, "<i4", n_reviews, "review dates").astype(np.int32)
    stars = _read_array(fh, "u1", n_reviews, "review stars")
    f_off = f_idx = None
    if flags & _FLAG_FRIENDS:
        f_off = _read_array(fh, "<u8", n_users + 1, "friend offsets").astype(np.int64)
        f_idx = _read_array(fh, "<u4", n_friend, "friend lists").astype(np.int32)
    if _read_exact(fh, 4, "trailer") != TRAILER:
        raise StoreFormatError("corrupt store file (bad trailer)")
    if venue_offsets[-1] != n_reviews:
        raise StoreFormatError("corrupt store file (venue offsets do not cover reviews)")
    return ReviewStore(user_ids, venue_ids, venue_offsets, user, date, stars, f_off, f_idx)


def save_store(store: ReviewStore, path) -> None:
    with open(path, "wb") as fh:
        write_store(store, fh)


def load_store(path) -> ReviewStore:
    with open(path, "rb") as fh:
        return read_store(fh)


def store_to_bytes(store: ReviewStore) -> bytes:
    buf = io.BytesIO()
    write_store(store, buf)
    return buf.getvalue()


def store_from_bytes(data: bytes) -> ReviewStore:
    return read_store(io.BytesIO(data))
