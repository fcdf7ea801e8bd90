# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Louvain local-move sweep.

Mirrors attnet.community._louvain_py.local_move move-for-move so both
kernels return bit-identical partitions.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def local_move(
    cnp.int64_t[::1] indptr,
    cnp.int32_t[::1] indices,
    cnp.float64_t[::1] weights,
    cnp.float64_t[::1] self_loops,
    cnp.float64_t[::1] k,
    cnp.int64_t[::1] comm,
    cnp.float64_t[::1] tot,
    cnp.float64_t[::1] inn,
    double m2,
    double gamma,
    cnp.int64_t[::1] order,
):
    """One local-move phase; mutates comm, tot, inn in place. Returns moves."""
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t n_nodes = comm.shape[0]
    cdef cnp.ndarray w_buf_arr = np.zeros(n_nodes, dtype=np.float64)
    cdef cnp.ndarray touched_arr = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray seen_arr = np.zeros(n_nodes, dtype=np.uint8)
    cdef cnp.float64_t[::1] w_buf = w_buf_arr
    cdef cnp.int64_t[::1] touched = touched_arr
    cdef cnp.uint8_t[::1] seen = seen_arr
    cdef double inv_m2 = 1.0 / m2
    cdef Py_ssize_t oi, p, t, n_touched
    cdef long long u, v, a, c, best_c
    cdef double ku, wa, wb, s, best_s, w
    cdef long long n_moves, total_moves = 0

    while True:
        n_moves = 0
        for oi in range(n):
            u = order[oi]
            a = comm[u]
            ku = k[u]
            n_touched = 0
            for p in range(indptr[u], indptr[u + 1]):
                v = indices[p]
                if v == u:
                    continue
                c = comm[v]
                if not seen[c]:
                    seen[c] = 1
                    touched[n_touched] = c
                    n_touched += 1
                    w_buf[c] = weights[p]
                else:
                    w_buf[c] = w_buf[c] + weights[p]
            wa = w_buf[a] if seen[a] else 0.0
            tot[a] -= ku
            best_c = a
            best_s = wa - gamma * ku * tot[a] * inv_m2
            for t in range(n_touched):
                c = touched[t]
                if c == a:
                    continue
                s = w_buf[c] - gamma * ku * tot[c] * inv_m2
                if s > best_s or (s == best_s and c < best_c):
                    best_c = c
                    best_s = s
            inn[a] -= 2.0 * wa + self_loops[u]
            wb = w_buf[best_c] if seen[best_c] else 0.0
            tot[best_c] += ku
            inn[best_c] += 2.0 * wb + self_loops[u]
            comm[u] = best_c
            if best_c != a:
                n_moves += 1
            for t in range(n_touched):
                seen[touched[t]] = 0
        total_moves += n_moves
        if n_moves == 0:
            break
    return int(total_moves)
