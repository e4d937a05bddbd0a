import itertools

import networkx as nx
import numpy as np
import pytest

from clustering.community import (
    Louvain, PoiNode, build_graph, detect_communities, louvain, modularity, pairwise_count,
    sweep_partition_threshold,
)
from tests.factories import fingerprint, random_fingerprint
from utils.exceptions import DomainError


def two_triangles() -> nx.Graph:
    graph = nx.Graph()
    graph.add_weighted_edges_from([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0),
                                   (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 0.1)])
    return graph


def random_graph(rng, n: int) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < 0.35:
            graph.add_edge(i, j, weight=float(rng.uniform(0.5, 1.0)))
    return graph


def as_sets(membership):
    groups = {}
    for node, community in enumerate(membership):
        groups.setdefault(community, set()).add(node)
    return list(groups.values())


def set_partitions(n: int):
    """Every partition of ``range(n)`` as a membership tuple in first-appearance order."""
    def grow(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for label in range(top + 2):
            yield from grow(prefix + [label], max(top, label))
    yield from grow([0], 0)


def best_modularity(graph) -> float:
    return max(modularity(graph, membership) for membership in set_partitions(graph.number_of_nodes()))


def single_moves(membership):
    """Every membership reachable by moving one node, into another community or alone."""
    labels = set(membership)
    alone = max(labels) + 1
    for node, own in enumerate(membership):
        for target in labels | {alone}:
            if target != own:
                moved = list(membership)
                moved[node] = target
                yield moved


def assert_locally_optimal(graph, partition):
    for moved in single_moves(partition.membership):
        assert modularity(graph, moved) <= partition.modularity + 1e-9


class TestPairwiseCount:
    @pytest.mark.parametrize("h,expected", [(2, 1), (3, 3), (41, 820), (100, 4950)])
    def test_count(self, h, expected):
        assert pairwise_count(h) == expected

    @pytest.mark.parametrize("h", [0, 1, -3, True, 2.5])
    def test_domain(self, h):
        with pytest.raises(DomainError):
            pairwise_count(h)


class TestModularity:
    def test_matches_networkx(self, rng):
        for _ in range(30):
            graph = random_graph(rng, 10)
            if graph.number_of_edges() == 0:
                continue
            membership = [int(rng.integers(3)) for _ in range(10)]
            expected = nx.community.modularity(graph, as_sets(membership), weight="weight")
            assert modularity(graph, membership) == pytest.approx(expected, abs=1e-12)

    def test_coarse_grained_graph_keeps_modularity(self):
        graph = two_triangles()
        membership = {0: 0, 1: 0, 2: 0, 3: 1, 4: 1, 5: 1}
        coarse = Louvain.coarse_grain(graph, membership)
        assert coarse[0][0]["weight"] == pytest.approx(3.0)
        assert modularity(coarse, [0, 1]) == pytest.approx(modularity(graph, list(membership.values())))

    def test_edgeless_graph(self):
        graph = nx.Graph()
        graph.add_nodes_from(range(3))
        assert modularity(graph, [0, 1, 2]) == 0.0


class TestLouvain:
    def test_two_triangles(self):
        partition = louvain(two_triangles())
        assert partition.membership == (0, 0, 0, 1, 1, 1)
        assert partition.community_count == 2
        expected = nx.community.modularity(two_triangles(), [{0, 1, 2}, {3, 4, 5}], weight="weight")
        assert partition.modularity == pytest.approx(expected)

    def test_improves_on_singletons(self, rng):
        for _ in range(40):
            graph = random_graph(rng, int(rng.integers(2, 14)))
            partition = louvain(graph)
            singletons = modularity(graph, list(range(graph.number_of_nodes())))
            assert partition.modularity >= singletons - 1e-12
            levels = list(partition.level_modularities)
            assert levels == sorted(levels)

    def test_result_is_locally_optimal_at_every_depth(self, rng):
        levels_seen = set()
        for _ in range(150):
            graph = random_graph(rng, int(rng.integers(2, 9)))
            partition = louvain(graph)
            levels_seen.add(len(partition.level_modularities))
            assert partition.modularity <= best_modularity(graph) + 1e-9
            assert_locally_optimal(graph, partition)
        assert any(depth > 1 for depth in levels_seen)

    def test_refinement_after_coarse_graining(self):
        graph = nx.Graph()
        graph.add_nodes_from(range(8))
        graph.add_weighted_edges_from([
            (0, 1, .955), (0, 2, .621), (0, 4, .665), (0, 6, .998), (1, 3, .609), (1, 6, .603), (1, 7, .569),
            (2, 6, .596), (2, 7, .635), (3, 4, .968), (3, 5, .569), (4, 7, .702), (5, 6, .903),
        ])
        partition = louvain(graph)
        assert partition.modularity > modularity(graph, [0, 0, 1, 2, 2, 0, 0, 1])
        assert partition.modularity <= best_modularity(graph) + 1e-9
        assert_locally_optimal(graph, partition)

    def test_refine_keeps_a_local_optimum(self):
        graph = two_triangles()
        assert Louvain(graph).refine((0, 0, 0, 1, 1, 1)) == (0, 0, 0, 1, 1, 1)

    def test_refine_moves_a_misplaced_node(self):
        graph = two_triangles()
        graph.add_edge(6, 0, weight=1.0)
        assert Louvain(graph).refine((0, 0, 0, 1, 1, 1, 1)) == (0, 0, 0, 1, 1, 1, 0)

    def test_communities_numbered_by_first_node(self, rng):
        for _ in range(20):
            partition = louvain(random_graph(rng, 12))
            seen = []
            for community in partition.membership:
                if community not in seen:
                    seen.append(community)
            assert seen == list(range(len(seen)))
            assert partition.communities()[0][0] == 0

    def test_deterministic(self, rng):
        graph = random_graph(rng, 12)
        assert louvain(graph) == louvain(graph)


class TestPoiGraph:
    def test_identical_fingerprints_form_one_community(self):
        fp = fingerprint({1: -40, 2: -60})
        nodes = [PoiNode(f"u{k}", 0, fp) for k in range(4)]
        graph, partition = detect_communities(nodes, 0.5)
        assert graph.edge_count == pairwise_count(4)
        assert partition.community_count == 1

    def test_disjoint_fingerprints_stay_apart(self):
        nodes = [PoiNode("u1", k, fingerprint({k: -50})) for k in range(5)]
        graph, partition = detect_communities(nodes, 0.5)
        assert graph.edge_count == 0
        assert partition.membership == (0, 1, 2, 3, 4)
        assert partition.modularity == 0.0

    def test_threshold_drops_weak_edges(self):
        nodes = [PoiNode("u1", 0, fingerprint({1: -50, 2: -50})), PoiNode("u2", 0, fingerprint({1: -50, 3: -50}))]
        assert build_graph(nodes, 0.4).edge_count == 1
        assert build_graph(nodes, 0.6).edge_count == 0

    @pytest.mark.parametrize("threshold", [0.0, -0.1, 1.01])
    def test_threshold_domain(self, threshold):
        with pytest.raises(DomainError):
            build_graph([], threshold)

    def test_node_key(self):
        node = PoiNode("u1", 3, fingerprint({1: -50}), region_id=2)
        assert node.key == ("u1", 2, 3)

    def test_sweep(self, rng):
        nodes = [PoiNode(f"u{k % 3}", k, random_fingerprint(rng, universe=15)) for k in range(12)]
        rows = sweep_partition_threshold(nodes, [0.3, 0.6, 0.9])
        edges = [row.edge_count for row in rows]
        assert edges == sorted(edges, reverse=True)
        for row in rows:
            _, partition = detect_communities(nodes, row.threshold)
            assert row.community_count == partition.community_count
            assert row.modularity == pytest.approx(partition.modularity)

    def test_weights_are_similarities(self, rng):
        nodes = [PoiNode("u1", k, random_fingerprint(rng)) for k in range(8)]
        graph = build_graph(nodes, 0.1).graph
        weights = np.array([w for _, _, w in graph.edges(data="weight")])
        assert np.all((weights >= 0.1) & (weights <= 1.0))
