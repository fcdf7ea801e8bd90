"""Shared test helpers."""
import numpy as np

from attnet.graph import SymmetricGraph
from attnet.ingest import Kind, TweetEvent


def make_sym_graph(n, edges):
    """SymmetricGraph from undirected (u, v, w) triples, no self-loops."""
    src, dst, wts = [], [], []
    for u, v, w in edges:
        src += [u, v]
        dst += [v, u]
        wts += [w, w]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int32)
    wts = np.asarray(wts, dtype=np.float64)
    order = np.lexsort((dst, src))
    src, dst, wts = src[order], dst[order], wts[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return SymmetricGraph(n, indptr, dst, wts, np.zeros(n))


def tweet(tid, author, ts, loc=None):
    return TweetEvent(tid, author, ts, Kind.ORIGINAL, raw_location=loc)


def retweet(tid, author, ts, rt_author, rt_id=None, loc=None):
    return TweetEvent(tid, author, ts, Kind.RETWEET, rt_author, rt_id, loc)
