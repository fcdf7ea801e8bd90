"""Pure-Python Louvain local-move sweep (fallback kernel).

Executes exactly the same move sequence as the compiled kernel: nodes are
visited in the given order, each node moves to the neighboring community
with the highest modularity gain (ties to the lowest community id), and
sweeps repeat until a full sweep makes no move. Partitions are therefore
bit-identical across the two kernels.
"""


def local_move(indptr, indices, weights, self_loops, k, comm, tot, inn, m2, gamma, order):
    """One local-move phase; mutates comm, tot, inn in place. Returns moves."""
    n = len(order)
    total_moves = 0
    inv_m2 = 1.0 / m2
    while True:
        n_moves = 0
        for oi in range(n):
            u = int(order[oi])
            a = int(comm[u])
            ku = k[u]
            # neighbor weight per community; dict keeps encounter order
            w_uc = {}
            for p in range(indptr[u], indptr[u + 1]):
                v = int(indices[p])
                if v == u:
                    continue
                c = int(comm[v])
                w_uc[c] = w_uc.get(c, 0.0) + weights[p]
            wa = w_uc.get(a, 0.0)
            tot[a] -= ku
            best_c = a
            best_s = wa - gamma * ku * tot[a] * inv_m2
            for c, w in w_uc.items():
                if c == a:
                    continue
                s = w - gamma * ku * tot[c] * inv_m2
                if s > best_s or (s == best_s and c < best_c):
                    best_c = c
                    best_s = s
            inn[a] -= 2.0 * wa + self_loops[u]
            wb = w_uc.get(best_c, 0.0)
            tot[best_c] += ku
            inn[best_c] += 2.0 * wb + self_loops[u]
            comm[u] = best_c
            if best_c != a:
                n_moves += 1
        total_moves += n_moves
        if n_moves == 0:
            break
    return total_moves
