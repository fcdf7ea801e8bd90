"""Modularity-maximizing community detection with multi-run consensus.

Louvain two-phase scheme: seeded-shuffle local moves (see _kernels for the
sweep implementation) followed by graph aggregation, repeated until the
pass-level modularity gain drops below tolerance. Consensus aligns R runs
to the highest-Q run by greedy maximum-overlap label matching and takes a
per-node majority.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..graph import SymmetricGraph
from ._kernels import local_move

logger = logging.getLogger(__name__)


class CommunityError(Exception):
    pass


@dataclass(frozen=True)
class LouvainConfig:
    resolution: float = 1.0
    seed: int = 0
    max_passes: int = 50
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.resolution <= 0:
            raise CommunityError("resolution must be positive")
        if self.tolerance < 0:
            raise CommunityError("tolerance must be nonnegative")


@dataclass
class Partition:
    assignment: np.ndarray  # int64, node -> community id, contiguous from 0
    q: float

    @property
    def n_communities(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_communities)


@dataclass
class ConsensusPartition:
    assignment: np.ndarray  # int64, contiguous from 0
    agreement: np.ndarray  # float64 in (0, 1]
    n_runs: int
    run_seeds: list = field(default_factory=list)
    run_q: list = field(default_factory=list)
    reference_run: int = 0

    @property
    def n_communities(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_communities)


def _q_from_arrays(inn: np.ndarray, tot: np.ndarray, m2: float, gamma: float) -> float:
    return float(inn.sum() / m2 - gamma * np.sum((tot / m2) ** 2))


def modularity(g: SymmetricGraph, assignment: np.ndarray, gamma: float = 1.0) -> float:
    """Q = (1/2m) sum_ij [w_ij - gamma k_i k_j / 2m] delta(c_i, c_j)."""
    m2 = g.total_degree
    if m2 <= 0:
        raise CommunityError("undefined modularity: graph has no edge weight")
    assignment = np.asarray(assignment, dtype=np.int64)
    if len(assignment) != g.n:
        raise CommunityError("partition does not cover all nodes")
    k = g.degrees
    ncomm = int(assignment.max()) + 1
    tot = np.bincount(assignment, weights=k, minlength=ncomm)
    src = np.repeat(np.arange(g.n), np.diff(g.indptr))
    intra = assignment[src] == assignment[g.indices]
    inn = np.bincount(assignment[src[intra]], weights=g.weights[intra], minlength=ncomm)
    inn += np.bincount(assignment, weights=g.self_loops, minlength=ncomm)
    return _q_from_arrays(inn, tot, m2, gamma)


def _aggregate(indptr, indices, weights, self_loops, k, node_to_comm, n_new):
    """Collapse communities into nodes, keeping intra weight as self-loops."""
    src = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    csrc = node_to_comm[src]
    cdst = node_to_comm[indices]
    diag = csrc == cdst
    new_self = np.bincount(csrc[diag], weights=weights[diag], minlength=n_new)
    new_self += np.bincount(node_to_comm, weights=self_loops, minlength=n_new)
    key = csrc[~diag].astype(np.int64) * n_new + cdst[~diag]
    ukey, inv = np.unique(key, return_inverse=True)
    agg_w = np.zeros(len(ukey))
    np.add.at(agg_w, inv, weights[~diag])
    new_src = (ukey // n_new).astype(np.int64)
    new_dst = (ukey % n_new).astype(np.int32)
    new_indptr = np.zeros(n_new + 1, dtype=np.int64)
    np.add.at(new_indptr, new_src + 1, 1)
    np.cumsum(new_indptr, out=new_indptr)
    new_k = np.bincount(node_to_comm, weights=k, minlength=n_new)
    return new_indptr, new_dst, agg_w, new_self, new_k


def louvain(g: SymmetricGraph, cfg: LouvainConfig) -> Partition:
    """Seeded Louvain run; returned Q equals modularity(g, assignment)."""
    if g.n == 0:
        raise CommunityError("empty graph")
    m2 = g.total_degree
    if m2 <= 0:
        raise CommunityError("undefined modularity: graph has no edge weight")
    rng = np.random.default_rng(cfg.seed)
    gamma = cfg.resolution

    indptr = g.indptr.astype(np.int64)
    indices = g.indices.astype(np.int32)
    weights = g.weights.astype(np.float64)
    self_loops = g.self_loops.astype(np.float64)
    k = g.degrees.astype(np.float64)

    mapping = np.arange(g.n, dtype=np.int64)  # original node -> current community
    n_level = g.n
    prev_q = _q_from_arrays(self_loops.copy(), k.copy(), m2, gamma)
    final_q = prev_q

    for _ in range(cfg.max_passes):
        comm = np.arange(n_level, dtype=np.int64)
        tot = k.copy()
        inn = self_loops.copy()
        order = rng.permutation(n_level).astype(np.int64)
        moves = local_move(indptr, indices, weights, self_loops, k, comm, tot, inn, m2, gamma, order)
        new_q = _q_from_arrays(inn, tot, m2, gamma)
        uniq, node_to_comm = np.unique(comm, return_inverse=True)
        node_to_comm = node_to_comm.astype(np.int64)
        mapping = node_to_comm[mapping]
        final_q = new_q
        gain = new_q - prev_q
        n_new = len(uniq)
        if moves == 0 or gain < cfg.tolerance or n_new == n_level:
            break
        indptr, indices, weights, self_loops, k = _aggregate(
            indptr, indices, weights, self_loops, k, node_to_comm, n_new
        )
        n_level = n_new
        prev_q = new_q

    _, assignment = np.unique(mapping, return_inverse=True)
    return Partition(assignment.astype(np.int64), final_q)


def align_labels(reference: np.ndarray, other: np.ndarray, fresh_start: int | None = None) -> np.ndarray:
    """Map `other` labels onto `reference` labels by greedy maximum overlap.

    Returns an array `mapped` over other's label space. Unmatched other
    labels get fresh ids above the reference label range, in ascending
    label order. Aligning a partition to a relabeled copy of itself
    recovers the identity mapping.
    """
    reference = np.asarray(reference, dtype=np.int64)
    other = np.asarray(other, dtype=np.int64)
    n_ref = int(reference.max()) + 1 if len(reference) else 0
    n_other = int(other.max()) + 1 if len(other) else 0
    key = other.astype(np.int64) * n_ref + reference
    ukey, counts = np.unique(key, return_counts=True)
    pairs = sorted(
        zip(-counts, ukey // n_ref, ukey % n_ref)
    )  # by overlap desc, then other label, then ref label
    mapping = np.full(n_other, -1, dtype=np.int64)
    ref_used = np.zeros(n_ref, dtype=bool)
    for negc, ol, rl in pairs:
        if mapping[ol] == -1 and not ref_used[rl]:
            mapping[ol] = rl
            ref_used[rl] = True
    fresh = n_ref if fresh_start is None else max(fresh_start, n_ref)
    for ol in range(n_other):
        if mapping[ol] == -1:
            mapping[ol] = fresh
            fresh += 1
    return mapping


def consensus(g: SymmetricGraph, cfg: LouvainConfig, n_runs: int) -> ConsensusPartition:
    """Majority assignment over n_runs aligned Louvain runs.

    Runs use seeds cfg.seed .. cfg.seed + n_runs - 1; alignment is anchored
    to the highest-Q run (ties to the lowest seed). Per-node ties go to the
    label with the larger global vote mass, then the lower label.
    """
    if n_runs < 1:
        raise CommunityError("n_runs must be >= 1")
    runs = []
    seeds = []
    for i in range(n_runs):
        seed = cfg.seed + i
        seeds.append(seed)
        runs.append(louvain(g, LouvainConfig(cfg.resolution, seed, cfg.max_passes, cfg.tolerance)))
    qs = np.array([r.q for r in runs])
    ref_i = int(np.argmax(qs))  # argmax takes the first (lowest-seed) maximum
    ref = runs[ref_i].assignment

    aligned = np.empty((n_runs, g.n), dtype=np.int64)
    fresh = int(ref.max()) + 1
    for i, run in enumerate(runs):
        mapping = align_labels(ref, run.assignment, fresh_start=fresh)
        fresh = max(fresh, int(mapping.max()) + 1)
        aligned[i] = mapping[run.assignment]

    n_labels = int(aligned.max()) + 1
    votes = np.zeros((g.n, n_labels), dtype=np.int32)
    rows = np.repeat(np.arange(g.n), n_runs)
    np.add.at(votes, (rows, aligned.T.ravel()), 1)
    label_mass = votes.sum(axis=0)
    # majority; ties -> larger global mass, then lower label
    order = np.lexsort((np.arange(n_labels), -label_mass))
    votes_ord = votes[:, order]
    winner_pos = np.argmax(votes_ord, axis=1)
    winner = order[winner_pos]
    agreement = votes[np.arange(g.n), winner] / n_runs

    _, assignment = np.unique(winner, return_inverse=True)
    return ConsensusPartition(
        assignment=assignment.astype(np.int64),
        agreement=agreement.astype(np.float64),
        n_runs=n_runs,
        run_seeds=seeds,
        run_q=[float(q) for q in qs],
        reference_run=ref_i,
    )


def nmi(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized mutual information (arithmetic-mean normalization)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if len(a) != len(b):
        raise CommunityError("partitions differ in length")
    n = len(a)
    if n == 0:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    na = ai.max() + 1
    nb = bi.max() + 1
    cont = np.zeros((na, nb))
    np.add.at(cont, (ai, bi), 1.0)
    pij = cont / n
    pa = pij.sum(axis=1)
    pb = pij.sum(axis=0)
    nz = pij > 0
    mi = np.sum(pij[nz] * np.log(pij[nz] / np.outer(pa, pb)[nz]))
    ha = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    hb = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    denom = (ha + hb) / 2.0
    if denom == 0.0:
        return 0.0
    return float(mi / denom)


@dataclass
class RankedCommunities:
    labels: dict  # community id -> letter label ("residual" below min_size)
    label_order: list  # letter labels in size rank order
    sizes: dict  # community id -> size
    coverage: float  # fraction of nodes in labeled communities
    warnings: list = field(default_factory=list)


def _letter_label(i: int) -> str:
    # A..Z, then AA, AB, ...
    out = []
    i += 1
    while i > 0:
        i, rem = divmod(i - 1, 26)
        out.append(chr(ord("A") + rem))
    return "".join(reversed(out))


def rank_communities(p: ConsensusPartition, min_size: int = 1) -> RankedCommunities:
    """Label communities A, B, ... by size descending; pool small ones.

    Ties on size break toward the smaller internal community id.
    """
    sizes = p.sizes
    ids = np.lexsort((np.arange(len(sizes)), -sizes))
    labels = {}
    order = []
    covered = 0
    for rank, cid in enumerate(ids):
        if sizes[cid] >= min_size:
            lab = _letter_label(rank)
            labels[int(cid)] = lab
            order.append(lab)
            covered += int(sizes[cid])
        else:
            labels[int(cid)] = "residual"
    total = int(sizes.sum())
    warnings = []
    if not order:
        warnings.append(f"no community reaches min_size={min_size}; all residual")
    coverage = covered / total if total else 0.0
    return RankedCommunities(
        labels=labels,
        label_order=order,
        sizes={int(c): int(s) for c, s in enumerate(sizes)},
        coverage=coverage,
        warnings=warnings,
    )
