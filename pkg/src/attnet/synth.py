"""Deterministic synthetic event-stream generator (test oracle).

Planted-block retweet streams with configurable per-segment block-to-block
retweet rates, within-block Zipf popularity of retweeted authors, and
per-block category/country mixes. The generator emits the ground truth
(block map, expected mixing matrices) alongside the stream; identical
configs produce byte-identical output (PCG64 via numpy default_rng, one
documented stream).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ingest import CATEGORIES, Kind, TweetEvent

logger = logging.getLogger(__name__)


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class SynthBlock:
    size: int
    categories: tuple  # ((label, prob), ...) summing to 1
    countries: tuple = ()  # ((iso, prob), ...) summing to <= 1; rest unknown

    def __post_init__(self):
        if self.size < 1:
            raise SynthError("block size must be >= 1")
        cp = sum(p for _, p in self.categories)
        if abs(cp - 1.0) > 1e-9:
            raise SynthError("category probabilities must sum to 1")
        for label, _ in self.categories:
            if label not in CATEGORIES:
                raise SynthError(f"unknown category {label!r}")
        if sum(p for _, p in self.countries) > 1.0 + 1e-9:
            raise SynthError("country probabilities exceed 1")


@dataclass(frozen=True)
class SynthSegment:
    start: int
    end: int
    rates: tuple  # rates[i][j]: intensity of block j retweeting block i

    def __post_init__(self):
        if self.start >= self.end:
            raise SynthError("segment start must precede end")
        for row in self.rates:
            for r in row:
                if r < 0:
                    raise SynthError("rates must be nonnegative")


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    blocks: tuple
    segments: tuple
    n_retweets: int
    popularity_exponent: float = 1.5
    originals_per_user: int = 3

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SynthConfig":
        blocks = tuple(
            SynthBlock(
                size=int(b["size"]),
                categories=tuple((c, float(p)) for c, p in b["categories"].items()),
                countries=tuple((c, float(p)) for c, p in b.get("countries", {}).items()),
            )
            for b in obj["blocks"]
        )
        segments = tuple(
            SynthSegment(int(s["start"]), int(s["end"]), tuple(tuple(r) for r in s["rates"]))
            for s in obj["segments"]
        )
        return cls(
            seed=int(obj["seed"]),
            blocks=blocks,
            segments=segments,
            n_retweets=int(obj["n_retweets"]),
            popularity_exponent=float(obj.get("popularity_exponent", 1.5)),
            originals_per_user=int(obj.get("originals_per_user", 3)),
        )


@dataclass
class SynthResult:
    events: list  # TweetEvent, time-sorted
    block_of: dict  # user_id -> block index
    user_categories: dict  # user_id -> category label
    user_countries: dict  # user_id -> iso or None
    expected_mixing: list  # per segment: (segment, expected count matrix)
    n_components_lower_bound: int  # from zero-rate block separation


def _user_id(i: int) -> str:
    return f"u{i:08d}"


def generate(cfg: SynthConfig) -> SynthResult:
    nb = len(cfg.blocks)
    if nb == 0:
        raise SynthError("need at least one block")
    for seg in cfg.segments:
        if len(seg.rates) != nb or any(len(r) != nb for r in seg.rates):
            raise SynthError("rate matrix shape must match block count")
    seg_mass = np.array(
        [(s.end - s.start) * float(np.sum(s.rates)) for s in cfg.segments]
    )
    if seg_mass.sum() <= 0:
        raise SynthError("infeasible rates: all zero")

    rng = np.random.default_rng(cfg.seed)
    sizes = np.array([b.size for b in cfg.blocks])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_users = int(offsets[-1])
    uids = [_user_id(i) for i in range(n_users)]

    block_of = {}
    user_categories = {}
    user_countries = {}
    for b, blk in enumerate(cfg.blocks):
        labels = [c for c, _ in blk.categories]
        probs = np.array([p for _, p in blk.categories])
        picks = rng.choice(len(labels), size=blk.size, p=probs)
        if blk.countries:
            isos = [c for c, _ in blk.countries]
            cps = [p for _, p in blk.countries]
            rest = 1.0 - sum(cps)
            cpicks = rng.choice(len(isos) + 1, size=blk.size, p=list(cps) + [max(rest, 0.0)])
        else:
            cpicks = np.full(blk.size, len(blk.countries))
        for local in range(blk.size):
            uid = uids[int(offsets[b]) + local]
            block_of[uid] = b
            user_categories[uid] = labels[int(picks[local])]
            if blk.countries and cpicks[local] < len(blk.countries):
                user_countries[uid] = blk.countries[int(cpicks[local])][0]
            else:
                user_countries[uid] = None

    period_start = min(s.start for s in cfg.segments)
    period_end = max(s.end for s in cfg.segments)

    # originals: fixed count per user, timestamps uniform over the period
    t_per_user = cfg.originals_per_user
    events = []
    orig_ids = {}  # user index -> list of tweet ids
    if t_per_user > 0:
        ts_all = rng.integers(period_start, period_end, size=n_users * t_per_user)
        seq = 0
        for ui in range(n_users):
            uid = uids[ui]
            ids = []
            for t in range(t_per_user):
                tid = f"t{seq:09d}"
                seq += 1
                ids.append(tid)
                events.append(
                    TweetEvent(
                        tweet_id=tid,
                        author_id=uid,
                        timestamp=int(ts_all[ui * t_per_user + t]),
                        kind=Kind.ORIGINAL,
                        raw_location=user_countries[uid],
                    )
                )
            orig_ids[ui] = ids

    # within-block popularity: weight rank^-exponent by local position
    pop_cdfs = []
    for blk in cfg.blocks:
        wts = np.arange(1, blk.size + 1, dtype=np.float64) ** (-cfg.popularity_exponent)
        pop_cdfs.append(np.cumsum(wts) / wts.sum())
    # per-author tweet popularity, same exponent over the author's originals
    if t_per_user > 0:
        tw = np.arange(1, t_per_user + 1, dtype=np.float64) ** (-cfg.popularity_exponent)
        tweet_cdf = np.cumsum(tw) / tw.sum()

    # allocate retweets to segments, then to block pairs, by expected mass
    seg_counts = rng.multinomial(cfg.n_retweets, seg_mass / seg_mass.sum())
    expected_mixing = []
    rt_seq = 0
    loc_of = [user_countries[u] for u in uids]
    for seg, n_seg in zip(cfg.segments, seg_counts):
        rates = np.asarray(seg.rates, dtype=np.float64)
        p = (rates / rates.sum()).ravel() if rates.sum() > 0 else np.zeros(nb * nb)
        expected_mixing.append((seg, float(n_seg) * p.reshape(nb, nb)))
        if n_seg == 0:
            continue
        cell_counts = rng.multinomial(int(n_seg), p).reshape(nb, nb)
        append = events.append
        for i in range(nb):
            for j in range(nb):
                c = int(cell_counts[i, j])
                if c == 0:
                    continue
                src_g = int(offsets[i]) + np.searchsorted(
                    pop_cdfs[i], rng.random(c), side="right"
                )
                dst_local = rng.integers(0, sizes[j], size=c)
                dst_g = int(offsets[j]) + dst_local
                # avoid self-retweets deterministically; a singleton block
                # wraps back onto itself and keeps the self-retweet
                coll = src_g == dst_g
                if coll.any():
                    dst_g[coll] = int(offsets[j]) + (dst_local[coll] + 1) % int(sizes[j])
                ts = rng.integers(seg.start, seg.end, size=c)
                if t_per_user > 0:
                    tpick = np.searchsorted(tweet_cdf, rng.random(c), side="right")
                    for s, d, t, tp in zip(
                        src_g.tolist(), dst_g.tolist(), ts.tolist(), tpick.tolist()
                    ):
                        append(
                            TweetEvent(
                                f"r{rt_seq:09d}", uids[d], t, Kind.RETWEET,
                                uids[s], orig_ids[s][tp], loc_of[d],
                            )
                        )
                        rt_seq += 1
                else:
                    for s, d, t in zip(src_g.tolist(), dst_g.tolist(), ts.tolist()):
                        append(
                            TweetEvent(
                                f"r{rt_seq:09d}", uids[d], t, Kind.RETWEET,
                                uids[s], None, loc_of[d],
                            )
                        )
                        rt_seq += 1

    events.sort(key=lambda e: (e.timestamp, e.tweet_id))

    # blocks with no connecting rates in any segment form separate components
    link = np.zeros((nb, nb), dtype=bool)
    for seg in cfg.segments:
        r = np.asarray(seg.rates) > 0
        link |= r | r.T
    n_comp = _count_block_components(link)
    return SynthResult(
        events=events,
        block_of=block_of,
        user_categories=user_categories,
        user_countries=user_countries,
        expected_mixing=expected_mixing,
        n_components_lower_bound=n_comp,
    )


def _count_block_components(link: np.ndarray) -> int:
    nb = link.shape[0]
    seen = [False] * nb
    comps = 0
    for s in range(nb):
        if seen[s]:
            continue
        comps += 1
        stack = [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            for v in range(nb):
                if link[u, v] and not seen[v]:
                    seen[v] = True
                    stack.append(v)
    return comps


def planted_partition_graph(
    sizes: Sequence[int], p_in: float, p_out: float, seed: int = 0
):
    """Bernoulli planted-partition graph as a SymmetricGraph plus labels."""
    from .graph import SymmetricGraph

    sizes = np.asarray(sizes)
    n = int(sizes.sum())
    labels = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    u = rng.random((n, n))
    same = labels[:, None] == labels[None, :]
    p = np.where(same, p_in, p_out)
    upper = np.triu(u < p, k=1)
    src, dst = np.nonzero(upper)
    both_src = np.concatenate([src, dst]).astype(np.int32)
    both_dst = np.concatenate([dst, src]).astype(np.int32)
    order = np.lexsort((both_dst, both_src))
    both_src = both_src[order]
    both_dst = both_dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, both_src + 1, 1)
    np.cumsum(indptr, out=indptr)
    g = SymmetricGraph(
        n, indptr, both_dst, np.ones(len(both_dst)), np.zeros(n)
    )
    return g, labels
