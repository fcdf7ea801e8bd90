"""Windowed super-community aggregation: mixing matrices and attention.

Weekly non-overlapping windows collapse the retweet stream into an S x S
mixing matrix w where w[i][j] counts retweets of super-community i's
content by super-community j. Attention per user, internal/external
attention shares, and per-user activity are derived per window.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .ingest import Kind, TweetEvent
from .profiles import SUPER_COMMUNITIES

logger = logging.getLogger(__name__)

WEEK_SECONDS = 7 * 86400
MONTH_SECONDS = 28 * 86400  # "1 month" pinned to exactly 4 weekly steps


class DynamicsError(Exception):
    pass


@dataclass(frozen=True)
class TimeWindow:
    start: int
    end: int  # half-open [start, end)

    def __post_init__(self):
        if self.start >= self.end:
            raise DynamicsError("window start must precede end")

    def contains(self, ts: int) -> bool:
        return self.start <= ts < self.end


def window_series(
    period: tuple[int, int], width: int, step: int
) -> tuple[list[TimeWindow], list[str]]:
    """Windows [t0 + k*step, t0 + k*step + width) clipped to the period.

    Weekly series is the special case width == step. Returns (windows,
    warnings).
    """
    t0, t1 = period
    if width <= 0 or step <= 0:
        raise DynamicsError("width and step must be positive")
    if step > width:
        raise DynamicsError("step must not exceed width")
    warnings = []
    if width > t1 - t0:
        warnings.append("window width exceeds period; emitting a single clipped window")
        return [TimeWindow(t0, t1)], warnings
    windows = []
    start = t0
    while start < t1:
        windows.append(TimeWindow(start, min(start + width, t1)))
        start += step
    return windows, warnings


@dataclass
class MixingMatrix:
    window: TimeWindow
    w: np.ndarray  # (S, S) int64; w[i][j] = retweets of i's content by j
    n_users: np.ndarray  # (S,) users of i retweeting or being retweeted
    groups: tuple = SUPER_COMMUNITIES
    unmapped_users: int = 0  # users routed to Other for lacking a mapping

    @property
    def total(self) -> int:
        return int(self.w.sum())

    def to_json_obj(self) -> dict:
        return {
            "window_start": self.window.start,
            "window_end": self.window.end,
            "groups": list(self.groups),
            "w": self.w.tolist(),
            "n_users": self.n_users.tolist(),
            "total": self.total,
            "unmapped_users": self.unmapped_users,
        }


def mixing_matrix(
    events: Sequence[TweetEvent],
    group_of: dict,
    window: Optional[TimeWindow] = None,
    groups: tuple = SUPER_COMMUNITIES,
) -> MixingMatrix:
    """Tally in-window retweets into the super-community mixing matrix.

    `group_of` maps user_id -> group name; users absent from the map are
    routed to "Other" and counted. Self-retweets are excluded, matching
    graph construction.
    """
    s = len(groups)
    gidx = {g: i for i, g in enumerate(groups)}
    other = gidx["Other"]
    w = np.zeros((s, s), dtype=np.int64)
    active: list[set] = [set() for _ in range(s)]
    unmapped: set = set()

    def resolve(uid: str) -> int:
        g = group_of.get(uid)
        if g is None:
            unmapped.add(uid)
            return other
        return gidx[g]

    for ev in events:
        if ev.kind is not Kind.RETWEET or ev.is_self_retweet:
            continue
        if window is not None and not window.contains(ev.timestamp):
            continue
        i = resolve(ev.retweeted_author_id)
        j = resolve(ev.author_id)
        w[i, j] += 1
        active[i].add(ev.retweeted_author_id)
        active[j].add(ev.author_id)
    n_users = np.array([len(a) for a in active], dtype=np.int64)
    if window is None:
        ts = [e.timestamp for e in events] or [0]
        window = TimeWindow(min(ts), max(ts) + 1)
    return MixingMatrix(window, w, n_users, groups, len(unmapped))


@dataclass
class AttentionRow:
    group: str
    n_users: int
    row_sum: int  # total retweets of the group's content in the window
    attention_per_user: Optional[Fraction]  # row_sum / N_i, kept exact
    a_ext: Optional[float]  # per-row normalization (sums with a_int to 1)
    a_int: Optional[float]
    a_ext_global: Optional[float]  # as-printed variant, normalized by W
    a_int_global: Optional[float]
    activity: Optional[float]  # original tweets per active member


def attention_metrics(
    m: MixingMatrix,
    original_counts: Optional[dict] = None,
    active_posters: Optional[dict] = None,
) -> list[AttentionRow]:
    """Per-group attention metrics for one window.

    `original_counts[group]` is the number of original tweets posted by the
    group's members in the window; `active_posters[group]` the number of
    distinct posting members. Missing metrics (empty group or zero row) are
    None, never a crash.
    """
    rows = []
    total = float(m.total)
    row_sums = m.w.sum(axis=1)
    for i, g in enumerate(m.groups):
        n_i = int(m.n_users[i])
        row = float(row_sums[i])
        diag = float(m.w[i, i])
        # exact rational so that A_u * N_i recovers the row sum exactly
        a_u = Fraction(int(row_sums[i]), n_i) if n_i > 0 else None
        if row > 0:
            a_ext = (row - diag) / row
            a_int = diag / row
        else:
            a_ext = a_int = None
        if total > 0:
            a_ext_g = (row - diag) / total
            a_int_g = diag / total
        else:
            a_ext_g = a_int_g = None
        activity = None
        if original_counts is not None and active_posters is not None:
            posters = active_posters.get(g, 0)
            if posters > 0:
                activity = original_counts.get(g, 0) / posters
        rows.append(
            AttentionRow(g, n_i, int(row), a_u, a_ext, a_int, a_ext_g, a_int_g, activity)
        )
    return rows


@dataclass
class WindowActivity:
    original_counts: dict = field(default_factory=dict)
    active_posters: dict = field(default_factory=dict)


def activity_counts(
    events: Sequence[TweetEvent],
    group_of: dict,
    window: Optional[TimeWindow] = None,
    groups: tuple = SUPER_COMMUNITIES,
    originals_only: bool = True,
) -> WindowActivity:
    """Original-tweet counts and distinct posting members per group.

    With originals_only=False, retweet posts count toward the numerator as
    well; originals-only is the default.
    """
    counts: dict[str, int] = {g: 0 for g in groups}
    posters: dict[str, set] = {g: set() for g in groups}
    for ev in events:
        if window is not None and not window.contains(ev.timestamp):
            continue
        g = group_of.get(ev.author_id, "Other")
        posters[g].add(ev.author_id)
        if ev.kind is Kind.ORIGINAL or not originals_only:
            counts[g] += 1
    return WindowActivity(
        original_counts=counts,
        active_posters={g: len(s) for g, s in posters.items()},
    )
