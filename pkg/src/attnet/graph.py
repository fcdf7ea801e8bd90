"""Weighted directed retweet graph in compressed sparse row form.

Edge A -> B with weight w means B retweeted A w times; weighted out-degree
is the number of retweets a user received. Self-retweets never become
edges. The symmetrized view sums both directions and backs community
detection.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .ingest import Kind, TweetEvent

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1
_MAX_WEIGHT = np.iinfo(np.int32).max


class GraphError(Exception):
    pass


class NodeRegistry:
    """Bijection between user ids and dense [0, n) indices."""

    def __init__(self, ids: np.ndarray):
        self.ids = np.asarray(ids)
        self._index = {uid: i for i, uid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, user_id: str) -> int:
        return self._index[user_id]

    def get(self, user_id: str) -> Optional[int]:
        return self._index.get(user_id)

    def id_of(self, index: int) -> str:
        return str(self.ids[index])


@dataclass
class RetweetGraph:
    n: int
    indptr: np.ndarray  # int64, len n+1; row u holds out-edges u -> v
    indices: np.ndarray  # int32 neighbor, sorted within each row
    weights: np.ndarray  # int32 counts >= 1

    @property
    def n_edges(self) -> int:
        return len(self.indices)

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    def out_degrees(self) -> np.ndarray:
        """Weighted out-degree per node (retweets received)."""
        deg = np.zeros(self.n, dtype=np.int64)
        src = np.repeat(np.arange(self.n), np.diff(self.indptr))
        np.add.at(deg, src, self.weights.astype(np.int64))
        return deg

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.n, dtype=np.int32), np.diff(self.indptr))
        return src, self.indices, self.weights


@dataclass
class SymmetricGraph:
    """Undirected view: weight(u, v) = w(u->v) + w(v->u).

    CSR stores each undirected edge in both rows; self_loops holds per-node
    internal weight already counted as ordered pairs (used by Louvain
    aggregation; zero for event-built graphs).
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray  # float64 for kernel arithmetic
    self_loops: np.ndarray  # float64, len n

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n)
        np.add.at(deg, np.repeat(np.arange(self.n), np.diff(self.indptr)), self.weights)
        return deg + self.self_loops

    @property
    def total_degree(self) -> float:
        """2m: every edge endpoint counted, self-loop weight included once."""
        return float(self.weights.sum() + self.self_loops.sum())


@dataclass
class ComponentReport:
    n_components: int = 0
    giant_size: int = 0
    discarded_count: int = 0
    discarded_min: int = 0
    discarded_median: float = 0.0
    discarded_max: int = 0
    discarded_node_fraction: float = 0.0
    discarded_edge_fraction: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _csr_from_pairs(n: int, src: np.ndarray, dst: np.ndarray, w: np.ndarray):
    """Aggregate duplicate (src, dst) pairs and build sorted CSR arrays."""
    key = src.astype(np.int64) * n + dst.astype(np.int64)
    ukey, inv = np.unique(key, return_inverse=True)
    agg = np.zeros(len(ukey), dtype=np.int64)
    np.add.at(agg, inv, w.astype(np.int64))
    if agg.size and agg.max() > _MAX_WEIGHT:
        raise GraphError("edge weight overflows 32-bit counter")
    usrc = (ukey // n).astype(np.int32)
    udst = (ukey % n).astype(np.int32)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, usrc + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, udst, agg.astype(np.int32)


def build_graph(events: Sequence[TweetEvent]) -> tuple[NodeRegistry, RetweetGraph]:
    """Aggregate non-self retweet events into the weighted directed graph.

    Nodes are exactly the users appearing as retweeter or retweeted.
    """
    index: dict[str, int] = {}
    srcs = []
    dsts = []
    for ev in events:
        if ev.kind is Kind.RETWEET and not ev.is_self_retweet:
            a = ev.retweeted_author_id
            b = ev.author_id
            ia = index.get(a)
            if ia is None:
                ia = index[a] = len(index)
            ib = index.get(b)
            if ib is None:
                ib = index[b] = len(index)
            srcs.append(ia)
            dsts.append(ib)
    if not srcs:
        return NodeRegistry(np.array([], dtype=object)), RetweetGraph(
            0,
            np.zeros(1, dtype=np.int64),
            np.array([], dtype=np.int32),
            np.array([], dtype=np.int32),
        )
    # sort the id space so node order is independent of event order
    ids = np.array(sorted(index), dtype=object)
    rank = np.empty(len(index), dtype=np.int64)
    rank[[index[u] for u in ids]] = np.arange(len(index))
    m = len(srcs)
    src_idx = rank[np.fromiter(srcs, dtype=np.int64, count=m)].astype(np.int32)
    dst_idx = rank[np.fromiter(dsts, dtype=np.int64, count=m)].astype(np.int32)
    n = len(ids)
    indptr, indices, weights = _csr_from_pairs(
        n, src_idx, dst_idx, np.ones(m, dtype=np.int64)
    )
    return NodeRegistry(ids), RetweetGraph(n, indptr, indices, weights)


def giant_component(
    g: RetweetGraph, registry: Optional[NodeRegistry] = None
) -> tuple[RetweetGraph, Optional[NodeRegistry], ComponentReport, np.ndarray]:
    """Restrict to the largest weakly connected component.

    Returns (subgraph, subregistry, report, kept-node original indices).
    """
    report = ComponentReport()
    if g.n == 0:
        return g, registry, report, np.array([], dtype=np.int64)
    src, dst, w = g.edge_arrays()
    mat = csr_matrix((w, (src, dst)), shape=(g.n, g.n))
    n_comp, labels = connected_components(mat, directed=True, connection="weak")
    report.n_components = int(n_comp)
    sizes = np.bincount(labels, minlength=n_comp)
    giant = int(sizes.argmax())
    keep = np.flatnonzero(labels == giant)
    report.giant_size = int(sizes[giant])
    discarded = np.delete(sizes, giant)
    if discarded.size:
        report.discarded_count = int(discarded.size)
        report.discarded_min = int(discarded.min())
        report.discarded_median = float(np.median(discarded))
        report.discarded_max = int(discarded.max())
        report.discarded_node_fraction = float(discarded.sum() / g.n)
    in_giant = labels == giant
    edge_keep = in_giant[src] & in_giant[dst]
    if g.n_edges:
        report.discarded_edge_fraction = float(1.0 - edge_keep.sum() / g.n_edges)
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    sub_n = len(keep)
    indptr, indices, weights = _csr_from_pairs(
        sub_n,
        remap[src[edge_keep]].astype(np.int32),
        remap[dst[edge_keep]].astype(np.int32),
        w[edge_keep],
    )
    sub = RetweetGraph(sub_n, indptr, indices, weights)
    sub_reg = NodeRegistry(registry.ids[keep]) if registry is not None else None
    return sub, sub_reg, report, keep


def symmetrize(g: RetweetGraph) -> SymmetricGraph:
    """Undirected weight(u, v) = w(u->v) + w(v->u); total weight preserved."""
    src, dst, w = g.edge_arrays()
    both_src = np.concatenate([src, dst])
    both_dst = np.concatenate([dst, src])
    both_w = np.concatenate([w, w])
    if g.n == 0:
        return SymmetricGraph(
            0,
            np.zeros(1, dtype=np.int64),
            np.array([], dtype=np.int32),
            np.array([], dtype=np.float64),
            np.array([], dtype=np.float64),
        )
    indptr, indices, weights = _csr_from_pairs(g.n, both_src, both_dst, both_w)
    return SymmetricGraph(
        g.n, indptr, indices, weights.astype(np.float64), np.zeros(g.n)
    )


@dataclass
class DegreeDistribution:
    degrees: np.ndarray  # weighted out-degree per node

    def histogram(self) -> dict[int, int]:
        vals, counts = np.unique(self.degrees, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def share_above(self, threshold: int) -> tuple[float, float]:
        """(fraction of users above threshold, fraction of retweets they receive)."""
        if len(self.degrees) == 0:
            return 0.0, 0.0
        mask = self.degrees > threshold
        total = self.degrees.sum()
        rt_share = float(self.degrees[mask].sum() / total) if total > 0 else 0.0
        return float(mask.mean()), rt_share


def degree_distribution(g: RetweetGraph) -> DegreeDistribution:
    return DegreeDistribution(g.out_degrees().astype(np.int64))


# ---------------------------------------------------------------------------
# snapshot / export


def save_snapshot(path: Path, registry: NodeRegistry, g: RetweetGraph) -> None:
    np.savez_compressed(
        path,
        version=np.int64(SNAPSHOT_VERSION),
        ids=registry.ids.astype(str),
        indptr=g.indptr,
        indices=g.indices,
        weights=g.weights,
    )


def load_snapshot(path: Path) -> tuple[NodeRegistry, RetweetGraph]:
    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != SNAPSHOT_VERSION:
            raise GraphError(f"unsupported snapshot version {int(z['version'])}")
        ids = z["ids"]
        g = RetweetGraph(len(ids), z["indptr"], z["indices"], z["weights"])
    return NodeRegistry(ids), g


def export_edge_list(path: Path, registry: NodeRegistry, g: RetweetGraph) -> None:
    """Plain-text `src<TAB>dst<TAB>weight` for external layout tools."""
    src, dst, w = g.edge_arrays()
    with open(path, "w", encoding="utf-8") as fh:
        for s, d, wt in zip(src, dst, w):
            fh.write(f"{registry.id_of(int(s))}\t{registry.id_of(int(d))}\t{int(wt)}\n")
