"""Per-user sustained-attention analysis.

Retweet h-index (largest h with h original tweets retweeted at least h
times each), top-K cohort selection per super-community, competition
ranking by retweets and h-index, bootstrap confidence intervals, and
rolling-window trajectories.
"""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import TimeWindow
from .ingest import Kind, TweetEvent

logger = logging.getLogger(__name__)

UNKNOWN_TWEET = "<unknown>"


class AttentionError(Exception):
    pass


def h_index(counts: Sequence[int]) -> int:
    """Largest h such that at least h elements are >= h."""
    arr = np.sort(np.asarray(list(counts), dtype=np.int64))[::-1]
    if arr.size == 0:
        return 0
    ge = arr >= np.arange(1, arr.size + 1)
    return int(ge.sum()) if ge.all() else int(np.argmin(ge))


@dataclass
class UserAttentionRecord:
    user_id: str
    group: str
    retweets_received: int
    h_index: int


@dataclass
class TallyReport:
    missing_tweet_id: int = 0  # retweets without rt_id, pooled per author


def tally_attention(
    events: Sequence[TweetEvent],
    group_of: dict,
    window: Optional[TimeWindow] = None,
    users: Optional[set] = None,
) -> tuple[dict[str, UserAttentionRecord], TallyReport]:
    """Retweets received and h-index per retweeted user.

    Retweets are attributed to original tweets by rt_id; events without one
    fall into a single per-author pseudo-tweet bucket (counted in the
    report so the inflation is visible). Self-retweets are excluded.
    """
    per_tweet: dict[str, Counter] = defaultdict(Counter)
    received: Counter = Counter()
    report = TallyReport()
    for ev in events:
        if ev.kind is not Kind.RETWEET or ev.is_self_retweet:
            continue
        if window is not None and not window.contains(ev.timestamp):
            continue
        author = ev.retweeted_author_id
        if users is not None and author not in users:
            continue
        tid = ev.retweeted_tweet_id
        if tid is None:
            tid = UNKNOWN_TWEET
            report.missing_tweet_id += 1
        per_tweet[author][tid] += 1
        received[author] += 1
    records = {}
    for author, tweets in per_tweet.items():
        records[author] = UserAttentionRecord(
            user_id=author,
            group=group_of.get(author, "Other"),
            retweets_received=received[author],
            h_index=h_index(list(tweets.values())),
        )
    return records, report


@dataclass
class Cohort:
    records: list  # UserAttentionRecord, selection order
    k: int
    retweet_share: float  # cohort's share of all tallied retweets
    warnings: list = field(default_factory=list)

    @property
    def user_ids(self) -> list:
        return [r.user_id for r in self.records]


def select_top_users(records: dict, k: int, groups: Sequence[str]) -> Cohort:
    """Top k users per group by retweets received.

    Ties break by h-index (higher first) then user_id (ascending).
    """
    by_group: dict[str, list] = {g: [] for g in groups}
    total = 0
    for rec in records.values():
        total += rec.retweets_received
        if rec.group in by_group:
            by_group[rec.group].append(rec)
    selected = []
    warnings = []
    for g in groups:
        pool = sorted(
            by_group[g], key=lambda r: (-r.retweets_received, -r.h_index, r.user_id)
        )
        if len(pool) < k:
            warnings.append(f"group {g!r} has only {len(pool)} users (< k={k})")
        selected.extend(pool[:k])
    share = sum(r.retweets_received for r in selected) / total if total else 0.0
    return Cohort(records=selected, k=k, retweet_share=share, warnings=warnings)


@dataclass
class RankTable:
    user_ids: list
    groups: list
    values: np.ndarray
    ranks: np.ndarray  # competition ranking, 1 = highest value

    def mean_rank_by_group(self) -> dict:
        out: dict[str, float] = {}
        for g in sorted(set(self.groups)):
            idx = [i for i, gg in enumerate(self.groups) if gg == g]
            out[g] = float(self.ranks[idx].mean())
        return out

    def group_ranks(self, group: str) -> np.ndarray:
        idx = [i for i, g in enumerate(self.groups) if g == group]
        return self.ranks[idx]


def competition_ranks(values: np.ndarray) -> np.ndarray:
    """Ties share the minimum rank: values [10, 10, 5] -> ranks [1, 1, 3]."""
    values = np.asarray(values)
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    rank = 0
    prev = None
    for pos, i in enumerate(order, start=1):
        if prev is None or values[i] != prev:
            rank = pos
            prev = values[i]
        ranks[i] = rank
    return ranks


def rank_cohort(cohort: Cohort, metric: str, values: Optional[dict] = None) -> RankTable:
    """Rank cohort members by `metric` in {"retweets", "h_index"}.

    `values` overrides the full-period record values (used for per-window
    recomputation); missing users get 0 and rank last (shared).
    """
    if metric not in ("retweets", "h_index"):
        raise AttentionError(f"unknown metric {metric!r}")
    vals = []
    for r in cohort.records:
        if values is not None:
            vals.append(values.get(r.user_id, 0))
        elif metric == "retweets":
            vals.append(r.retweets_received)
        else:
            vals.append(r.h_index)
    arr = np.asarray(vals, dtype=np.int64)
    return RankTable(
        user_ids=cohort.user_ids,
        groups=[r.group for r in cohort.records],
        values=arr,
        ranks=competition_ranks(arr),
    )


def bootstrap_mean_rank(
    ranks: Sequence[float], n_resamples: int = 1000, level: float = 0.95, seed: int = 0
) -> tuple[float, float, float]:
    """Percentile bootstrap CI for the mean of a group's ranks."""
    arr = np.asarray(list(ranks), dtype=np.float64)
    if arr.size == 0:
        raise AttentionError("empty group")
    if n_resamples < 1:
        raise AttentionError("need at least one resample")
    if not 0.0 < level < 1.0:
        raise AttentionError("level must be in (0, 1)")
    if arr.size == 1:
        logger.warning("singleton group; CI collapses to the point")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(n_resamples, arr.size))
    means = arr[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(arr.mean()), float(lo), float(hi)


@dataclass
class TrajectoryPoint:
    window: TimeWindow
    group: str
    mean_r_rt: float
    rt_ci: tuple
    mean_r_h: float
    h_ci: tuple


def rolling_attention(
    events: Sequence[TweetEvent],
    cohort: Cohort,
    windows: Sequence[TimeWindow],
    group_of: dict,
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    groups: Optional[Sequence[str]] = None,
) -> tuple[list[TrajectoryPoint], list[str]]:
    """Per-window rank trajectories for the cohort (data behind Fig-style
    vector plots). Windows with zero cohort retweet events are skipped and
    noted.
    """
    cohort_set = set(cohort.user_ids)
    if groups is None:
        groups = sorted(set(r.group for r in cohort.records))
    events = list(events)
    # time-sorted streams (the common case) allow per-window slicing instead
    # of a full scan per window
    ts = np.fromiter((e.timestamp for e in events), dtype=np.int64, count=len(events))
    time_sorted = bool(np.all(ts[1:] >= ts[:-1])) if len(ts) > 1 else True
    points = []
    notes = []
    for wi, window in enumerate(windows):
        if time_sorted:
            lo = int(np.searchsorted(ts, window.start, side="left"))
            hi = int(np.searchsorted(ts, window.end, side="left"))
            ev_w = events[lo:hi]
        else:
            ev_w = events
        records, _ = tally_attention(ev_w, group_of, window=window, users=cohort_set)
        if not records:
            notes.append(f"window starting {window.start} has no cohort retweets; skipped")
            continue
        rt_vals = {u: r.retweets_received for u, r in records.items()}
        h_vals = {u: r.h_index for u, r in records.items()}
        rt_table = rank_cohort(cohort, "retweets", values=rt_vals)
        h_table = rank_cohort(cohort, "h_index", values=h_vals)
        for gi, g in enumerate(groups):
            g_rt = rt_table.group_ranks(g)
            g_h = h_table.group_ranks(g)
            if g_rt.size == 0:
                continue
            boot_seed = seed + wi * len(groups) + gi
            m_rt, lo_rt, hi_rt = bootstrap_mean_rank(g_rt, n_resamples, level, boot_seed)
            m_h, lo_h, hi_h = bootstrap_mean_rank(g_h, n_resamples, level, boot_seed + 10_000_019)
            points.append(
                TrajectoryPoint(window, g, m_rt, (lo_rt, hi_rt), m_h, (lo_h, hi_h))
            )
    return points, notes
