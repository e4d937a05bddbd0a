"""Popular-place detection across users.

POI fingerprints become nodes of an undirected graph whose edges carry the
pairwise cosine similarity; edges under the partition threshold are dropped.
Communities come from a deterministic Louvain run: nodes are swept in
insertion order and each level is coarse-grained into a graph whose self-loops
hold the intra-community weight. A last sweep of single-node moves on the
input graph leaves no node that could raise modularity by switching.
"""

from collections import defaultdict
from dataclasses import dataclass
from itertools import count
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import networkx as nx

from clustering.similarity import cosine_similarity
from model.types import Fingerprint
from utils.exceptions import DomainError
from utils.log import logger

# smallest modularity gain that counts as an improvement
GAIN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PoiNode:
    """A POI of one user, as seen by community detection."""
    user_id: str
    poi_id: int
    fingerprint: Fingerprint
    region_id: int = 0

    @property
    def key(self) -> Tuple[str, int, int]:
        return (self.user_id, self.region_id, self.poi_id)


@dataclass(frozen=True)
class SimilarityGraph:
    nodes: Tuple[PoiNode, ...]
    graph: nx.Graph
    threshold: float

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()


@dataclass(frozen=True)
class Partition:
    """Community id per node (in node order) and the partition's modularity."""
    membership: Tuple[int, ...]
    modularity: float
    level_modularities: Tuple[float, ...] = ()

    @property
    def community_count(self) -> int:
        return len(set(self.membership))

    def communities(self) -> List[List[int]]:
        grouped: Dict[int, List[int]] = defaultdict(list)
        for node, community in enumerate(self.membership):
            grouped[community].append(node)
        return [grouped[c] for c in sorted(grouped)]


@dataclass(frozen=True)
class ThresholdSweepRow:
    threshold: float
    edge_count: int
    community_count: int
    modularity: float


def pairwise_count(h: int) -> int:
    """
    Number of pairwise similarity scores among ``h`` POIs.

    Args:
        h (int): Node count

    Returns:
        int: ``h * (h - 1) / 2``

    Raises:
        DomainError: If ``h < 2``
    """
    if isinstance(h, bool) or not isinstance(h, int) or h < 2:
        raise DomainError(f"pairwise count needs at least 2 nodes, got {h!r}")
    return h * (h - 1) // 2


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold <= 1.0:
        raise DomainError(f"partition threshold must lie in (0, 1], got {threshold}")


def _pair_similarities(pois: Sequence[PoiNode]) -> Dict[Tuple[int, int], float]:
    sims = {}
    for i in range(len(pois)):
        for j in range(i + 1, len(pois)):
            fi, fj = pois[i].fingerprint, pois[j].fingerprint
            if fi.p and fj.p:
                sims[(i, j)] = cosine_similarity(fi, fj)
    return sims


def _graph_from(pois: Sequence[PoiNode], sims: Dict[Tuple[int, int], float],
                threshold: float) -> SimilarityGraph:
    graph = nx.Graph()
    for i, poi in enumerate(pois):
        graph.add_node(i, poi=poi)
    for (i, j), weight in sims.items():
        if weight >= threshold:
            graph.add_edge(i, j, weight=weight)
    return SimilarityGraph(tuple(pois), graph, threshold)


def build_graph(pois: Sequence[PoiNode], threshold: float) -> SimilarityGraph:
    """
    Build the POI similarity graph.

    Args:
        pois (Sequence[PoiNode]): Nodes, in the order community ids should follow
        threshold (float): Minimum similarity for an edge, in (0, 1]

    Returns:
        SimilarityGraph: Graph over node indices ``0..h-1``

    Raises:
        DomainError: If the threshold is out of range
    """
    _check_threshold(threshold)
    return _graph_from(pois, _pair_similarities(pois), threshold)


def modularity(graph: nx.Graph, membership: Sequence[int]) -> float:
    """
    Weighted modularity of a partition.

    Self-loops count once towards the intra-community weight and twice towards
    the degree, so a coarse-grained graph scores the same as the graph it
    came from.
    """
    m = graph.size(weight="weight")
    if m == 0:
        return 0.0
    index = {node: i for i, node in enumerate(graph.nodes)}
    internal: Dict[int, float] = defaultdict(float)
    degree: Dict[int, float] = defaultdict(float)
    for u, v, w in graph.edges(data="weight", default=1.0):
        if membership[index[u]] == membership[index[v]]:
            internal[membership[index[u]]] += w
    for node, k in graph.degree(weight="weight"):
        degree[membership[index[node]]] += k
    return sum(internal[c] / m - (degree[c] / (2 * m)) ** 2 for c in degree)


class CommunityTracker:
    """Running degree and incident weight totals for one Louvain level."""

    def __init__(self, graph: nx.Graph, membership: Optional[Sequence[int]] = None):
        self.m = graph.size(weight="weight")
        self.node_to_community: Dict[Hashable, int] = {}
        self.degrees: Dict[Hashable, float] = {}
        self.community_degrees: Dict[int, float] = defaultdict(float)
        for position, node in enumerate(graph.nodes):
            community = position if membership is None else membership[position]
            self.node_to_community[node] = community
            self.degrees[node] = graph.degree(node, weight="weight")
            self.community_degrees[community] += self.degrees[node]

    def remove(self, node: Hashable, community: int) -> None:
        self.community_degrees[community] -= self.degrees[node]
        self.node_to_community[node] = None

    def insert(self, node: Hashable, community: int) -> None:
        self.community_degrees[community] += self.degrees[node]
        self.node_to_community[node] = community

    def gain(self, node: Hashable, community: int, incident_weight: float) -> float:
        """Modularity gain (times ``m``) of moving an isolated node into ``community``."""
        return incident_weight - self.community_degrees[community] * self.degrees[node] / (2 * self.m)


class Louvain:
    """Two-phase Louvain with a fixed sweep order and a final refinement on the input graph."""

    def __init__(self, graph: nx.Graph):
        self.original_graph = graph
        self.coarse_grain_graph = graph
        self.community_history: List[Dict[Hashable, int]] = []
        self.level_modularities: List[float] = []

    @staticmethod
    def neighbour_communities(graph: nx.Graph, node: Hashable,
                              community_map: Dict[Hashable, int]) -> Dict[int, float]:
        weights: Dict[int, float] = {}
        for neighbour, data in graph[node].items():
            if neighbour == node:
                continue
            community = community_map[neighbour]
            weights[community] = weights.get(community, 0.0) + data.get("weight", 1.0)
        return weights

    @classmethod
    def move_nodes(cls, graph: nx.Graph, tracker: CommunityTracker, isolate: bool = False) -> bool:
        """
        Greedy single-node moves until a full sweep moves nothing.

        Args:
            graph (nx.Graph): Graph whose nodes are moved
            tracker (CommunityTracker): Current assignment, updated in place
            isolate (bool): Also allow moving a node into a community of its own

        Returns:
            bool: True when any node changed community
        """
        community_map = tracker.node_to_community
        spare_labels = count(len(graph))
        modified = False
        improved = True

        while improved:
            improved = False
            for node in graph.nodes:
                old_community = community_map[node]
                weights = cls.neighbour_communities(graph, node, community_map)
                tracker.remove(node, old_community)
                best_community = old_community
                best_gain = tracker.gain(node, old_community, weights.get(old_community, 0.0))
                for community, incident in weights.items():
                    delta = tracker.gain(node, community, incident)
                    if delta > best_gain + GAIN_TOLERANCE:
                        best_community, best_gain = community, delta
                if isolate and best_gain < -GAIN_TOLERANCE:
                    best_community = next(spare_labels)
                tracker.insert(node, best_community)
                if best_community != old_community:
                    improved = modified = True
        return modified

    def iterate(self) -> bool:
        """Run one level; returns False when no node moved."""
        graph = self.coarse_grain_graph
        tracker = CommunityTracker(graph)
        if not self.move_nodes(graph, tracker):
            return False
        relabelled = self.relabel(graph, tracker.node_to_community)
        self.community_history.append(relabelled)
        self.coarse_grain_graph = self.coarse_grain(graph, relabelled)
        return True

    def refine(self, membership: Sequence[int]) -> Tuple[int, ...]:
        """Move single input nodes until no move raises modularity."""
        graph = self.original_graph
        tracker = CommunityTracker(graph, membership)
        if not self.move_nodes(graph, tracker, isolate=True):
            return tuple(membership)
        relabelled = self.relabel(graph, tracker.node_to_community)
        return tuple(relabelled[node] for node in graph.nodes)

    @staticmethod
    def relabel(graph: nx.Graph, community_map: Dict[Hashable, int]) -> Dict[Hashable, int]:
        """Number communities by first appearance in node order."""
        labels: Dict[int, int] = {}
        for node in graph.nodes:
            labels.setdefault(community_map[node], len(labels))
        return {node: labels[community_map[node]] for node in graph.nodes}

    @staticmethod
    def coarse_grain(graph: nx.Graph, community_map: Dict[Hashable, int]) -> nx.Graph:
        coarse = nx.Graph()
        coarse.add_nodes_from(sorted(set(community_map.values())))
        for u, v, w in graph.edges(data="weight", default=1.0):
            c1, c2 = community_map[u], community_map[v]
            if coarse.has_edge(c1, c2):
                coarse[c1][c2]["weight"] += w
            else:
                coarse.add_edge(c1, c2, weight=w)
        return coarse

    def membership(self) -> Tuple[int, ...]:
        labels = []
        for node in self.original_graph.nodes:
            community = node
            for level in self.community_history:
                community = level[community]
            labels.append(community)
        if not self.community_history:
            labels = list(range(len(labels)))
        return tuple(labels)

    def run(self) -> Partition:
        membership = self.membership()
        if self.original_graph.size(weight="weight") > 0:
            while self.iterate():
                self.level_modularities.append(modularity(self.original_graph, self.membership()))
            membership = self.refine(self.membership())
        return Partition(
            membership=membership,
            modularity=modularity(self.original_graph, membership),
            level_modularities=tuple(self.level_modularities),
        )


def louvain(graph) -> Partition:
    """
    Detect communities with the Louvain method.

    Args:
        graph (SimilarityGraph): The graph (a bare ``nx.Graph`` is accepted too)

    Returns:
        Partition: Membership in node order, with modularity per level
    """
    g = graph.graph if isinstance(graph, SimilarityGraph) else graph
    partition = Louvain(g).run()
    logger.debug("louvain finished", {
        "nodes": g.number_of_nodes(), "edges": g.number_of_edges(),
        "communities": partition.community_count, "modularity": partition.modularity,
    })
    return partition


def sweep_partition_threshold(pois: Sequence[PoiNode], thresholds: Sequence[float]) -> List[ThresholdSweepRow]:
    """
    Community count and modularity for several partition thresholds.

    Pairwise similarities are computed once and re-thresholded per value.
    """
    for threshold in thresholds:
        _check_threshold(threshold)
    sims = _pair_similarities(pois)
    rows = []
    for threshold in thresholds:
        sg = _graph_from(pois, sims, threshold)
        partition = louvain(sg)
        rows.append(ThresholdSweepRow(threshold, sg.edge_count, partition.community_count, partition.modularity))
    return rows


def detect_communities(pois: Sequence[PoiNode], threshold: float) -> Tuple[SimilarityGraph, Partition]:
    """Build the graph and partition it in one call."""
    graph = build_graph(pois, threshold)
    return graph, louvain(graph)
