from ._core import (
    CommunityError,
    ConsensusPartition,
    LouvainConfig,
    Partition,
    align_labels,
    consensus,
    louvain,
    modularity,
    nmi,
    rank_communities,
)
from ._kernels import KERNEL_NAME, kernel_available

__all__ = [
    "CommunityError",
    "ConsensusPartition",
    "LouvainConfig",
    "Partition",
    "align_labels",
    "consensus",
    "louvain",
    "modularity",
    "nmi",
    "rank_communities",
    "KERNEL_NAME",
    "kernel_available",
]
