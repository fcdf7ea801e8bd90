import numpy as np
import pytest

from attnet.ingest import Kind, write_events_jsonl
from attnet.synth import (
    SynthBlock,
    SynthConfig,
    SynthError,
    SynthSegment,
    generate,
    planted_partition_graph,
)


def two_block_config(seed=7, n_retweets=2000, originals=2):
    blocks = (
        SynthBlock(size=30, categories=(("Science", 0.5), ("Other", 0.5)),
                   countries=(("FR", 0.6), ("DE", 0.3))),
        SynthBlock(size=50, categories=(("Other", 1.0),)),
    )
    segments = (
        SynthSegment(0, 1000, ((1.0, 0.1), (0.1, 1.0))),
        SynthSegment(1000, 2000, ((1.0, 0.5), (0.5, 1.0))),
    )
    return SynthConfig(seed=seed, blocks=blocks, segments=segments,
                       n_retweets=n_retweets, originals_per_user=originals)


def test_generate_is_deterministic(tmp_path):
    r1 = generate(two_block_config())
    r2 = generate(two_block_config())
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_events_jsonl(r1.events, p1)
    write_events_jsonl(r2.events, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert r1.block_of == r2.block_of


def test_generate_shapes_and_sorting():
    res = generate(two_block_config())
    assert sum(1 for e in res.events if e.kind == Kind.RETWEET) == 2000
    assert sum(1 for e in res.events if e.kind == Kind.ORIGINAL) == 80 * 2
    ts = [e.timestamp for e in res.events]
    assert ts == sorted(ts)
    assert sum(1 for b in res.block_of.values() if b == 0) == 30
    assert sum(1 for b in res.block_of.values() if b == 1) == 50
    # every retweet points at one of the source author's originals
    originals = {e.tweet_id: e.author_id for e in res.events if e.kind == Kind.ORIGINAL}
    for e in res.events:
        if e.kind == Kind.RETWEET:
            assert originals[e.retweeted_tweet_id] == e.retweeted_author_id


def test_generate_avoids_self_retweets():
    res = generate(two_block_config())
    assert not any(e.is_self_retweet for e in res.events if e.kind == Kind.RETWEET)


def test_generate_singleton_block_keeps_self_retweet():
    cfg = SynthConfig(
        seed=1,
        blocks=(SynthBlock(size=1, categories=(("Other", 1.0),)),),
        segments=(SynthSegment(0, 100, ((1.0,),)),),
        n_retweets=10,
    )
    res = generate(cfg)
    rts = [e for e in res.events if e.kind == Kind.RETWEET]
    assert len(rts) == 10 and all(e.is_self_retweet for e in rts)


def test_realized_mixing_tracks_expectation():
    res = generate(two_block_config(n_retweets=20000))
    realized = np.zeros((2, 2))
    for e in res.events:
        if e.kind != Kind.RETWEET:
            continue
        realized[res.block_of[e.retweeted_author_id], res.block_of[e.author_id]] += 1
    expected = sum(m for _, m in res.expected_mixing)
    assert realized.sum() == 20000
    # multinomial noise: allow 5 sigma per cell
    sigma = np.sqrt(expected * (1 - expected / 20000)) + 1e-9
    assert np.all(np.abs(realized - expected) <= 5 * sigma)


def test_category_and_country_assignment():
    res = generate(two_block_config())
    block0 = [u for u, b in res.block_of.items() if b == 0]
    block1 = [u for u, b in res.block_of.items() if b == 1]
    assert all(res.user_categories[u] == "Other" for u in block1)
    assert {res.user_categories[u] for u in block0} <= {"Science", "Other"}
    assert all(res.user_countries[u] is None for u in block1)
    assert {res.user_countries[u] for u in block0} <= {"FR", "DE", None}


def test_components_lower_bound():
    blocks = tuple(SynthBlock(size=5, categories=(("Other", 1.0),)) for _ in range(3))
    rates = ((1.0, 1.0, 0.0), (1.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    cfg = SynthConfig(seed=0, blocks=blocks,
                      segments=(SynthSegment(0, 10, rates),), n_retweets=100)
    assert generate(cfg).n_components_lower_bound == 2


def test_config_validation():
    with pytest.raises(SynthError):
        SynthBlock(size=0, categories=(("Other", 1.0),))
    with pytest.raises(SynthError):
        SynthBlock(size=5, categories=(("Other", 0.5),))  # probs sum != 1
    with pytest.raises(SynthError):
        SynthBlock(size=5, categories=(("Astrology", 1.0),))
    with pytest.raises(SynthError):
        SynthSegment(10, 10, ((1.0,),))
    with pytest.raises(SynthError):
        SynthSegment(0, 10, ((-1.0,),))
    with pytest.raises(SynthError):
        generate(SynthConfig(seed=0, blocks=(), segments=(), n_retweets=1))
    blk = SynthBlock(size=2, categories=(("Other", 1.0),))
    with pytest.raises(SynthError):
        generate(SynthConfig(seed=0, blocks=(blk,),
                             segments=(SynthSegment(0, 10, ((0.0,),)),), n_retweets=1))
    with pytest.raises(SynthError):
        generate(SynthConfig(seed=0, blocks=(blk, blk),
                             segments=(SynthSegment(0, 10, ((1.0,),)),), n_retweets=1))


def test_from_json_obj_roundtrip():
    obj = {
        "seed": 3,
        "n_retweets": 50,
        "blocks": [{"size": 4, "categories": {"Other": 1.0}, "countries": {"FR": 0.5}}],
        "segments": [{"start": 0, "end": 10, "rates": [[1.0]]}],
    }
    cfg = SynthConfig.from_json_obj(obj)
    assert cfg.blocks[0].countries == (("FR", 0.5),)
    assert cfg.originals_per_user == 3  # default
    generate(cfg)


def test_planted_partition_graph():
    g, labels = planted_partition_graph([40, 40], p_in=0.3, p_out=0.01, seed=5)
    assert g.n == 80 and len(labels) == 80
    # symmetric adjacency
    import scipy.sparse as sp

    m = sp.csr_matrix((g.weights, g.indices, g.indptr), shape=(80, 80))
    assert (m != m.T).nnz == 0
    same = int(m[:40, :40].sum() + m[40:, 40:].sum())
    cross = int(m[:40, 40:].sum() + m[40:, :40].sum())
    assert same > cross
