"""WiFi fingerprint similarity, indoor POI clustering and community detection."""
from clustering.community import (
    Partition, PoiNode, SimilarityGraph, build_graph, louvain, modularity,
    pairwise_count, sweep_partition_threshold,
)
from clustering.similarity import (
    AdaptiveThreshold, FixedThreshold, ThresholdPolicy, compute_threshold,
    cosine_similarity, similarity_matrix,
)
from clustering.wifi_cluster import (
    ClusterRun, PoiRegistry, build_fingerprint, extract_poi, match_revisit, neighbors_of,
)

__all__ = [
    'AdaptiveThreshold', 'ClusterRun', 'FixedThreshold', 'Partition', 'PoiNode',
    'PoiRegistry', 'SimilarityGraph', 'ThresholdPolicy', 'build_fingerprint',
    'build_graph', 'compute_threshold', 'cosine_similarity', 'extract_poi',
    'louvain', 'match_revisit', 'modularity', 'neighbors_of', 'pairwise_count',
    'similarity_matrix', 'sweep_partition_threshold',
]
