"""Kernel selection: compiled Louvain local-move sweep with pure fallback.

Set ATTNET_PURE_PYTHON=1 to force the fallback. Both kernels execute the
identical move sequence and produce bit-identical partitions; the compiled
one is just fast.
"""
import os

from . import _louvain_py

if os.environ.get("ATTNET_PURE_PYTHON", "") not in ("", "0"):
    local_move = _louvain_py.local_move
    KERNEL_NAME = "python"
else:
    try:
        from attnet import _louvain_cy

        local_move = _louvain_cy.local_move
        KERNEL_NAME = "cython"
    except ImportError:
        local_move = _louvain_py.local_move
        KERNEL_NAME = "python"


def kernel_available() -> bool:
    return KERNEL_NAME == "cython"
