"""Event-stream ingestion: JSONL tweet events, user categories, gazetteer.

Parsing is tolerant (malformed lines are counted, never fatal) and fully
accounted: every input line ends up in exactly one of {kept, malformed,
out-of-window, duplicate}.
"""
from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

logger = logging.getLogger(__name__)

# The 13 user categories accepted in the category table.
CATEGORIES = (
    "Adult content",
    "Arts & Entertainment",
    "Business",
    "Healthcare",
    "Media",
    "NGO",
    "Political Supporter",
    "Government & Politics",
    "Public Services",
    "Religion",
    "Science",
    "Sports",
    "Other",
)
_CATEGORY_SET = frozenset(CATEGORIES)


class Kind(Enum):
    ORIGINAL = 0
    RETWEET = 1


class TweetEvent(NamedTuple):
    # NamedTuple rather than a dataclass: construction cost dominates
    # million-event ingest runs.
    tweet_id: str
    author_id: str
    timestamp: int  # UTC seconds since epoch
    kind: Kind
    retweeted_author_id: Optional[str] = None
    retweeted_tweet_id: Optional[str] = None
    raw_location: Optional[str] = None

    @property
    def is_self_retweet(self) -> bool:
        return self.kind is Kind.RETWEET and self.retweeted_author_id == self.author_id

    def to_json_obj(self) -> dict:
        obj = {
            "id": self.tweet_id,
            "author_id": self.author_id,
            "ts": self.timestamp,
            "kind": "retweet" if self.kind is Kind.RETWEET else "tweet",
        }
        if self.retweeted_author_id is not None:
            obj["rt_author_id"] = self.retweeted_author_id
        if self.retweeted_tweet_id is not None:
            obj["rt_id"] = self.retweeted_tweet_id
        if self.raw_location is not None:
            obj["loc"] = self.raw_location
        return obj


@dataclass
class IngestReport:
    lines_in: int = 0
    kept: int = 0
    retweets: int = 0
    originals: int = 0
    malformed: int = 0
    out_of_window: int = 0
    duplicates: int = 0
    self_retweets: int = 0
    warnings: list = field(default_factory=list)

    def accounted(self) -> bool:
        return self.kept + self.malformed + self.out_of_window + self.duplicates == self.lines_in

    def to_dict(self) -> dict:
        return {
            "lines_in": self.lines_in,
            "kept": self.kept,
            "retweets": self.retweets,
            "originals": self.originals,
            "malformed": self.malformed,
            "out_of_window": self.out_of_window,
            "duplicates": self.duplicates,
            "self_retweets": self.self_retweets,
            "warnings": list(self.warnings),
        }


class IngestError(Exception):
    pass


def _parse_ts(value) -> int:
    """Accept epoch seconds (int/float/str) or ISO-8601."""
    if isinstance(value, bool):
        raise ValueError("bad timestamp")
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        s = value.strip()
        try:
            return int(float(s))
        except ValueError:
            pass
        if s.endswith("Z"):
            s = s[:-1] + "+00:00"
        dt = datetime.fromisoformat(s)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise ValueError("bad timestamp")


# fast paths for the compact layout write_events_jsonl emits; anything else
# (escapes, reordered keys, extra fields) falls back to the tolerant parser
_FAST_RETWEET = re.compile(
    r'^\{"author_id":"([^"\\]+)","id":"([^"\\]+)","kind":"retweet"'
    r'(?:,"loc":"([^"\\]*)")?,"rt_author_id":"([^"\\]+)"(?:,"rt_id":"([^"\\]+)")?'
    r',"ts":(\d+)\}\s*$'
)
_FAST_TWEET = re.compile(
    r'^\{"author_id":"([^"\\]+)","id":"([^"\\]+)","kind":"tweet"'
    r'(?:,"loc":"([^"\\]*)")?,"ts":(\d+)\}\s*$'
)


def _parse_line(line: str) -> TweetEvent:
    m = _FAST_RETWEET.match(line)
    if m:
        author, tid, loc, rt_author, rt_id, ts = m.groups()
        return TweetEvent(tid, author, int(ts), Kind.RETWEET, rt_author, rt_id, loc)
    m = _FAST_TWEET.match(line)
    if m:
        author, tid, loc, ts = m.groups()
        return TweetEvent(tid, author, int(ts), Kind.ORIGINAL, None, None, loc)
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("not an object")
    tweet_id = obj["id"]
    author_id = obj["author_id"]
    if not isinstance(tweet_id, str) or not tweet_id:
        raise ValueError("bad id")
    if not isinstance(author_id, str) or not author_id:
        raise ValueError("bad author_id")
    ts = _parse_ts(obj["ts"])
    kind_s = obj["kind"]
    if kind_s == "tweet":
        kind = Kind.ORIGINAL
        rt_author = None
        rt_id = None
    elif kind_s == "retweet":
        kind = Kind.RETWEET
        rt_author = obj.get("rt_author_id")
        if not isinstance(rt_author, str) or not rt_author:
            raise ValueError("retweet without rt_author_id")
        rt_id = obj.get("rt_id")
        if rt_id is not None and (not isinstance(rt_id, str) or not rt_id):
            raise ValueError("bad rt_id")
    else:
        raise ValueError(f"unknown kind {kind_s!r}")
    loc = obj.get("loc")
    if loc is not None and not isinstance(loc, str):
        raise ValueError("bad loc")
    return TweetEvent(tweet_id, author_id, ts, kind, rt_author, rt_id, loc)


def parse_events(
    lines: Iterable[str],
    window: tuple[int, int],
) -> tuple[list[TweetEvent], IngestReport]:
    """Parse a JSONL event stream restricted to the half-open window [t0, t1).

    Returns events time-sorted, deduplicated by tweet_id (the record sorting
    first under (timestamp, line order) wins), plus a full accounting report.
    """
    t0, t1 = window
    report = IngestReport()
    seen: dict[str, TweetEvent] = {}
    dup_ids: dict[str, int] = {}
    order: dict[str, int] = {}
    for lineno, line in enumerate(lines):
        if not line.strip():
            continue
        report.lines_in += 1
        try:
            ev = _parse_line(line)
        except (ValueError, KeyError, TypeError, json.JSONDecodeError):
            report.malformed += 1
            continue
        if not (t0 <= ev.timestamp < t1):
            report.out_of_window += 1
            continue
        prev = seen.get(ev.tweet_id)
        if prev is None:
            seen[ev.tweet_id] = ev
            order[ev.tweet_id] = lineno
        else:
            report.duplicates += 1
            # keep the earliest-timestamp record; line order breaks ties
            if ev.timestamp < prev.timestamp:
                seen[ev.tweet_id] = ev
                order[ev.tweet_id] = lineno
    events = sorted(seen.values(), key=lambda e: (e.timestamp, order[e.tweet_id]))
    report.kept = len(events)
    for ev in events:
        if ev.kind is Kind.RETWEET:
            report.retweets += 1
            if ev.is_self_retweet:
                report.self_retweets += 1
        else:
            report.originals += 1
    if report.lines_in > 0 and report.kept == 0:
        report.warnings.append("nonzero input produced zero events")
    return events, report


def parse_events_files(paths: Sequence[Path], window: tuple[int, int]):
    def gen():
        for p in paths:
            with open(p, "r", encoding="utf-8") as fh:
                yield from fh
    return parse_events(gen(), window)


# printable ASCII without '"' and '\': safe to emit unescaped
_PLAIN_JSON = re.compile(r'^[ !#-\[\]-~]*$')


def _jstr(s: str) -> str:
    if _PLAIN_JSON.match(s):
        return f'"{s}"'
    return json.dumps(s)


def write_events_jsonl(events: Sequence[TweetEvent], path: Path) -> None:
    """One compact JSON object per line, keys sorted (deterministic bytes)."""
    with open(path, "w", encoding="utf-8") as fh:
        buf = []
        for ev in events:
            parts = [f'"author_id":{_jstr(ev.author_id)}', f'"id":{_jstr(ev.tweet_id)}']
            parts.append('"kind":"retweet"' if ev.kind is Kind.RETWEET else '"kind":"tweet"')
            if ev.raw_location is not None:
                parts.append(f'"loc":{_jstr(ev.raw_location)}')
            if ev.retweeted_author_id is not None:
                parts.append(f'"rt_author_id":{_jstr(ev.retweeted_author_id)}')
            if ev.retweeted_tweet_id is not None:
                parts.append(f'"rt_id":{_jstr(ev.retweeted_tweet_id)}')
            parts.append(f'"ts":{ev.timestamp}')
            buf.append("{" + ",".join(parts) + "}\n")
            if len(buf) >= 16384:
                fh.writelines(buf)
                buf = []
        fh.writelines(buf)


# ---------------------------------------------------------------------------
# user categories


def load_categories(path: Path) -> dict[str, str]:
    """CSV `user_id,category` with header; unknown labels are rejected."""
    out: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "user_id" not in reader.fieldnames or "category" not in reader.fieldnames:
            raise IngestError(f"{path}: expected header user_id,category")
        for row in reader:
            cat = row["category"]
            if cat not in _CATEGORY_SET:
                raise IngestError(f"{path}: unknown category {cat!r} for user {row['user_id']!r}")
            out[row["user_id"]] = cat
    return out


# ---------------------------------------------------------------------------
# gazetteer and geo-resolution


@dataclass(frozen=True)
class GazetteerEntry:
    tokens: tuple[str, ...]
    country: str
    priority: int


class Gazetteer:
    """Ordered token-sequence patterns mapping location text to ISO countries."""

    def __init__(self, entries: Sequence[GazetteerEntry]):
        seen = set()
        for e in entries:
            if e.tokens in seen:
                raise IngestError(f"duplicate gazetteer pattern {' '.join(e.tokens)!r}")
            seen.add(e.tokens)
        by_tokens = {e.tokens: e for e in entries}
        for e in entries:
            for cut in range(1, len(e.tokens)):
                pref = by_tokens.get(e.tokens[:cut])
                if pref is not None and pref.priority >= e.priority:
                    raise IngestError(
                        f"pattern {' '.join(e.tokens)!r} must outrank its prefix "
                        f"{' '.join(pref.tokens)!r}"
                    )
        self.entries = list(entries)
        self._index: dict[str, list[GazetteerEntry]] = {}
        for e in entries:
            self._index.setdefault(e.tokens[0], []).append(e)
        self._max_len = max((len(e.tokens) for e in entries), default=0)

    @classmethod
    def load(cls, path: Path) -> "Gazetteer":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise IngestError(f"{path}:{lineno}: expected pattern<TAB>country<TAB>priority")
                tokens = tuple(tokenize(parts[0]))
                if not tokens:
                    raise IngestError(f"{path}:{lineno}: empty pattern")
                entries.append(GazetteerEntry(tokens, parts[1].upper(), int(parts[2])))
        return cls(entries)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    out = []
    cur = []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def resolve_country(raw_location: str, gazetteer: Gazetteer) -> Optional[str]:
    """Country of the highest-priority pattern matching anywhere in the text.

    Ties on priority go to the longer pattern, then gazetteer file order.
    Total function: unmatched or empty input returns None.
    """
    if not raw_location:
        return None
    tokens = tokenize(raw_location)
    best: Optional[GazetteerEntry] = None
    best_order = -1
    for i, tok in enumerate(tokens):
        for order, e in enumerate(gazetteer._index.get(tok, ())):
            if tuple(tokens[i : i + len(e.tokens)]) != e.tokens:
                continue
            if best is None or (e.priority, len(e.tokens)) > (best.priority, len(best.tokens)):
                best, best_order = e, order
    return best.country if best is not None else None


def assign_user_countries(
    events: Sequence[TweetEvent], gazetteer: Gazetteer
) -> dict[str, Optional[str]]:
    """Per-user majority country over resolved tweet locations.

    Ties are broken toward the country first seen in event order. Users with
    zero resolved locations map to None.
    """
    counts: dict[str, dict[str, int]] = {}
    first_seen: dict[str, dict[str, int]] = {}
    loc_cache: dict[str, Optional[str]] = {}
    seq = 0
    for ev in events:
        if not ev.raw_location:
            continue
        c = loc_cache.get(ev.raw_location)
        if c is None and ev.raw_location not in loc_cache:
            c = resolve_country(ev.raw_location, gazetteer)
            loc_cache[ev.raw_location] = c
        if c is None:
            continue
        ucounts = counts.setdefault(ev.author_id, {})
        ucounts[c] = ucounts.get(c, 0) + 1
        ufirst = first_seen.setdefault(ev.author_id, {})
        if c not in ufirst:
            ufirst[c] = seq
        seq += 1
    result: dict[str, Optional[str]] = {}
    for uid, ucounts in counts.items():
        ufirst = first_seen[uid]
        result[uid] = max(ucounts, key=lambda c: (ucounts[c], -ufirst[c]))
    return result
