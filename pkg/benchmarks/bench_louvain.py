"""Benchmark the compiled Louvain local-move kernel against the pure fallback.

Runs the full Louvain pipeline on planted-partition graphs of growing size
with each kernel and reports wall time plus the speedup. Partitions must be
bit-identical, so the benchmark doubles as a parity check.

Usage: python benchmarks/bench_louvain.py [--sizes 1000,5000,20000]
"""
import argparse
import time

import numpy as np

from attnet.community import LouvainConfig, kernel_available
from attnet.community import _core, _kernels
from attnet.community._louvain_py import local_move as py_local_move
from attnet.synth import planted_partition_graph


def run_with_kernel(g, kernel, seed=0, repeats=3):
    saved = _kernels.local_move
    _core.local_move = kernel
    try:
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            p = _core.louvain(g, LouvainConfig(seed=seed))
            best = min(best, time.perf_counter() - t0)
        return best, p
    finally:
        _core.local_move = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="1000,5000,20000",
                    help="comma-separated node counts")
    ap.add_argument("--blocks", type=int, default=10)
    args = ap.parse_args()

    if not kernel_available():
        print("compiled kernel not available; nothing to compare")
        return

    from attnet import _louvain_cy

    print(f"{'nodes':>8} {'edges':>10} {'cython':>10} {'python':>10} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        per = n // args.blocks
        g, _ = planted_partition_graph(
            [per] * args.blocks, p_in=min(1.0, 20.0 / per), p_out=2.0 / n, seed=1
        )
        t_cy, p_cy = run_with_kernel(g, _louvain_cy.local_move)
        t_py, p_py = run_with_kernel(g, py_local_move)
        assert np.array_equal(p_cy.assignment, p_py.assignment), "kernel mismatch"
        assert p_cy.q == p_py.q
        print(f"{n:>8} {len(g.indices) // 2:>10} {t_cy:>9.3f}s {t_py:>9.3f}s "
              f"{t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
