import os
import subprocess
import sys

import numpy as np
import pytest

from attnet.community import (
    CommunityError,
    ConsensusPartition,
    LouvainConfig,
    align_labels,
    consensus,
    louvain,
    modularity,
    nmi,
    rank_communities,
)
from attnet.community._core import _letter_label
from attnet.synth import planted_partition_graph
from conftest import make_sym_graph

TRIANGLE_EDGES = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]


def two_triangles(bridge=False):
    edges = TRIANGLE_EDGES + [(u + 3, v + 3, w) for u, v, w in TRIANGLE_EDGES]
    if bridge:
        edges.append((2, 3, 1.0))
    return make_sym_graph(6, edges)


def test_modularity_two_triangles():
    g = two_triangles()
    q = modularity(g, np.array([0, 0, 0, 1, 1, 1]))
    assert q == pytest.approx(0.5, abs=1e-15)


def test_modularity_one_community_is_zero():
    g = two_triangles()
    assert modularity(g, np.zeros(6, dtype=int)) == pytest.approx(0.0, abs=1e-15)


def test_modularity_rejects_empty_and_short():
    g = make_sym_graph(2, [])
    with pytest.raises(CommunityError):
        modularity(g, np.array([0, 0]))
    g = two_triangles()
    with pytest.raises(CommunityError):
        modularity(g, np.array([0, 0, 0]))


def test_modularity_resolution_scaling():
    g = two_triangles()
    part = np.array([0, 0, 0, 1, 1, 1])
    # Q(gamma) = inn/m2 - gamma * sum(tot/m2)^2 = 1 - gamma * 0.5 here
    assert modularity(g, part, gamma=2.0) == pytest.approx(0.0, abs=1e-12)


def test_louvain_splits_bridged_triangles():
    g = two_triangles(bridge=True)
    p = louvain(g, LouvainConfig(seed=0))
    assert p.n_communities == 2
    assert len(set(p.assignment[:3])) == 1
    assert len(set(p.assignment[3:])) == 1
    assert p.assignment[0] != p.assignment[3]


def test_louvain_q_matches_modularity():
    for seed in range(5):
        g, _ = planted_partition_graph([40, 40, 40], 0.2, 0.01, seed=seed)
        p = louvain(g, LouvainConfig(seed=seed))
        assert p.q == pytest.approx(modularity(g, p.assignment), abs=1e-9)


def test_louvain_deterministic_per_seed():
    g, _ = planted_partition_graph([50, 50], 0.2, 0.02, seed=3)
    p1 = louvain(g, LouvainConfig(seed=7))
    p2 = louvain(g, LouvainConfig(seed=7))
    assert np.array_equal(p1.assignment, p2.assignment)
    assert p1.q == p2.q


def test_align_labels_recovers_identity():
    rng = np.random.default_rng(0)
    ref = rng.integers(0, 6, size=80)
    perm = rng.permutation(6)
    other = perm[ref]
    mapping = align_labels(ref, other)
    assert np.array_equal(mapping[other], ref)


def test_align_labels_fresh_ids_above_reference():
    ref = np.array([0, 0, 1, 1])
    other = np.array([0, 0, 1, 2])  # label 2 has no partner
    mapping = align_labels(ref, other)
    assert mapping[2] >= 2
    mapping = align_labels(ref, other, fresh_start=10)
    assert mapping[2] == 10


def test_consensus_majority_and_agreement():
    g = two_triangles(bridge=True)
    cp = consensus(g, LouvainConfig(seed=0), n_runs=5)
    assert cp.n_runs == 5
    assert cp.run_seeds == [0, 1, 2, 3, 4]
    assert cp.n_communities == 2
    assert np.all(cp.agreement > 0) and np.all(cp.agreement <= 1)
    assert len(cp.run_q) == 5


def test_consensus_rejects_zero_runs():
    g = two_triangles()
    with pytest.raises(CommunityError):
        consensus(g, LouvainConfig(), n_runs=0)


def test_nmi_cases():
    a = np.array([0, 0, 1, 1, 2, 2])
    assert nmi(a, a) == pytest.approx(1.0)
    perm = np.array([2, 2, 0, 0, 1, 1])
    assert nmi(a, perm) == pytest.approx(1.0)
    assert nmi(a, np.zeros(6, dtype=int)) == pytest.approx(0.0)
    assert 0.0 < nmi(a, np.array([0, 0, 1, 1, 1, 1])) < 1.0


def test_rank_communities_letters_and_residual():
    cp = ConsensusPartition(
        assignment=np.array([0, 0, 0, 1, 1, 2]),
        agreement=np.ones(6),
        n_runs=1,
    )
    ranked = rank_communities(cp, min_size=2)
    assert ranked.labels[0] == "A"
    assert ranked.labels[1] == "B"
    assert ranked.labels[2] == "residual"
    assert ranked.label_order == ["A", "B"]
    assert ranked.coverage == pytest.approx(5 / 6)


def test_rank_communities_size_tie_breaks_by_id():
    cp = ConsensusPartition(
        assignment=np.array([1, 1, 0, 0]), agreement=np.ones(4), n_runs=1
    )
    ranked = rank_communities(cp)
    assert ranked.labels[0] == "A" and ranked.labels[1] == "B"


def test_letter_labels_roll_over():
    assert _letter_label(0) == "A"
    assert _letter_label(25) == "Z"
    assert _letter_label(26) == "AA"
    assert _letter_label(27) == "AB"


# --- kernel selection and parity ---------------------------------------------


def test_kernel_reports_name():
    from attnet.community import _kernels

    assert _kernels.KERNEL_NAME in ("cython", "python")


def test_pure_python_env_var_forces_fallback():
    code = (
        "from attnet.community import _kernels; print(_kernels.KERNEL_NAME)"
    )
    env = dict(os.environ, ATTNET_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.stdout.strip() == "python"


def test_kernels_bit_identical():
    cy = pytest.importorskip("attnet._louvain_cy")
    from attnet.community._louvain_py import local_move as py_move

    g, _ = planted_partition_graph([60, 60, 60], 0.15, 0.01, seed=11)
    m2 = g.total_degree
    k = g.degrees
    rng = np.random.default_rng(5)
    order = rng.permutation(g.n).astype(np.int64)

    def run(move):
        comm = np.arange(g.n, dtype=np.int64)
        tot = k.copy()
        inn = g.self_loops.copy()
        moves = move(
            g.indptr.astype(np.int64), g.indices.astype(np.int32),
            g.weights.astype(np.float64), g.self_loops.astype(np.float64),
            k.astype(np.float64), comm, tot, inn, m2, 1.0, order,
        )
        return moves, comm, tot, inn

    m_py, c_py, t_py, i_py = run(py_move)
    m_cy, c_cy, t_cy, i_cy = run(cy.local_move)
    assert m_py == m_cy
    assert np.array_equal(c_py, c_cy)
    # bit-identical accumulators, not just close
    assert np.array_equal(t_py, t_cy)
    assert np.array_equal(i_py, i_cy)


def test_full_louvain_identical_across_kernels():
    pytest.importorskip("attnet._louvain_cy")
    g, _ = planted_partition_graph([80, 80], 0.15, 0.01, seed=2)
    code = (
        "import numpy as np\n"
        "from attnet.synth import planted_partition_graph\n"
        "from attnet.community import louvain, LouvainConfig\n"
        "g, _ = planted_partition_graph([80, 80], 0.15, 0.01, seed=2)\n"
        "p = louvain(g, LouvainConfig(seed=4))\n"
        "print(repr(p.q)); print(','.join(map(str, p.assignment)))\n"
    )
    outs = []
    for pure in ("0", "1"):
        env = dict(os.environ, ATTNET_PURE_PYTHON=pure)
        r = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert r.returncode == 0, r.stderr
        outs.append(r.stdout)
    assert outs[0] == outs[1]
