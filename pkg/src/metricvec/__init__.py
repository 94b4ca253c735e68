"""Graph classification via normalized transport-distance profiles.

Pipeline: frequent-fragment mining -> fragment embedding -> pairwise
Wasserstein-2 distances between fragment point clouds -> per-graph
normalized distance vectors over a class-ordered support set ->
lightweight classifiers and evaluation protocols.
"""

from .datasets import (
    Graph,
    GraphDataset,
    SplitConfig,
    load_tudataset,
    stratified_kfold,
    stratified_sample,
)
from .fragments import (
    Fragment,
    FragmentDecomposition,
    MiningConfig,
    canonical_code,
    decompose,
    mine_frequent_fragments,
    support,
)
from .embedding import EmbedConfig, EmbeddingTable, VectorSet, embed_decomposition, train_pvdbow
from .transport import (
    SinkhornConfig,
    TransportPlan,
    cost_matrix,
    exact_ot_small,
    graph_distance,
    sinkhorn,
    wasserstein2_1d,
)
from .metric import (
    DistanceCache,
    MetricVector,
    SupportSet,
    build_support_set,
    embed_all,
    metric_vector,
)

__version__ = "0.1.0"
