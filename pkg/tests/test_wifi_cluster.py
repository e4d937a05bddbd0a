import numpy as np
import pytest
from sklearn.cluster import DBSCAN

from clustering.similarity import AdaptiveThreshold, FixedThreshold, similarity_matrix
from clustering.wifi_cluster import (
    PoiRegistry, build_fingerprint, density_clusters, extract_poi, fingerprint_of, match_revisit,
    neighbors_of, split_visits,
)
from model.types import PoiCluster, ScanList, TimeWindow
from tests.factories import T0, fingerprint, mac, random_scans, scans_of
from utils.exceptions import EmptyCluster, StoreError


def neighbour_matrix(scans: ScanList, cfg) -> np.ndarray:
    sims = similarity_matrix(scans.scans)
    p = np.array([s.n for s in scans])
    low = p <= cfg.ap_low_count
    eps = np.where(low[:, None] & low[None, :], cfg.eps_low, cfg.eps_high)
    heard = p > 0
    adjacent = (sims >= eps) & heard[:, None] & heard[None, :]
    np.fill_diagonal(adjacent, True)
    return adjacent


def reference_dbscan(adjacent: np.ndarray, min_pts: int):
    """Clusters as connected components of core points, borders to the earliest reaching cluster."""
    n = len(adjacent)
    core = [i for i in range(n) if adjacent[i].sum() >= min_pts]
    core_set = set(core)
    component = {}
    clusters = []
    for seed in core:
        if seed in component:
            continue
        members, stack = set(), [seed]
        component[seed] = len(clusters)
        while stack:
            i = stack.pop()
            members.add(i)
            for j in np.flatnonzero(adjacent[i]):
                if int(j) in core_set and int(j) not in component:
                    component[int(j)] = len(clusters)
                    stack.append(int(j))
        clusters.append(members)
    for b in range(n):
        if b in core_set:
            continue
        reaching = [component[c] for c in np.flatnonzero(adjacent[b]) if int(c) in core_set]
        if reaching:
            clusters[min(reaching)].add(b)
    return [sorted(c) for c in clusters], core


class TestDensityClusters:
    def test_matches_reference_on_random_scan_lists(self, rng, cfg):
        for _ in range(500):
            scans = random_scans(rng, int(rng.integers(1, 201)), places=int(rng.integers(1, 7)))
            run = extract_poi(scans, cfg)
            expected, _ = reference_dbscan(neighbour_matrix(scans, cfg), cfg.min_pts_poi)
            assert [list(c.member_indices) for c in run.clusters] == expected
            clustered = {i for c in run.clusters for i in c.member_indices}
            assert set(run.noise) == set(range(len(scans))) - clustered

    def test_core_points_agree_with_sklearn(self, rng, cfg):
        for _ in range(20):
            scans = random_scans(rng, 40)
            adjacent = neighbour_matrix(scans, cfg)
            distance = np.where(adjacent, 0.0, 2.0)
            model = DBSCAN(eps=1.0, min_samples=cfg.min_pts_poi, metric="precomputed").fit(distance)
            _, core = reference_dbscan(adjacent, cfg.min_pts_poi)
            assert sorted(model.core_sample_indices_.tolist()) == core

            run = extract_poi(scans, cfg)
            ours = {i: c.poi_id for c in run.clusters for i in c.member_indices}
            for i in core:
                for j in core:
                    assert (ours[i] == ours[j]) == (model.labels_[i] == model.labels_[j])

    def test_every_point_visited_once(self, rng, cfg):
        scans = random_scans(rng, 50)
        run = extract_poi(scans, cfg)
        assert run.similarity_evaluations <= len(scans) ** 2

    def test_deterministic(self, rng, cfg):
        scans = random_scans(rng, 40)
        assert extract_poi(scans, cfg) == extract_poi(scans, cfg)

    def test_border_goes_to_first_cluster(self):
        # two cliques of four joined only through point 4, which is not core
        adjacency = {i: [0, 1, 2, 3] for i in range(3)}
        adjacency[3] = [0, 1, 2, 3, 4]
        adjacency[4] = [3, 4, 5]
        adjacency[5] = [4, 5, 6, 7, 8]
        adjacency.update({i: [5, 6, 7, 8] for i in range(6, 9)})
        clusters, noise = density_clusters(9, lambda i: adjacency[i], 4)
        assert clusters == [[0, 1, 2, 3, 4], [5, 6, 7, 8]]
        assert noise == []


class TestExtractPoi:
    def test_two_places(self, cfg):
        home = [{1: -40, 2: -50, 3: -60}] * 5
        shop = [{7: -45, 8: -55, 9: -65}] * 5
        run = extract_poi(scans_of(home + shop), cfg)
        assert [c.member_indices for c in run.clusters] == [(0, 1, 2, 3, 4), (5, 6, 7, 8, 9)]
        assert [c.poi_id for c in run.clusters] == [0, 1]
        assert run.noise == ()
        assert run.labels() == [0] * 5 + [1] * 5

    def test_too_few_scans_is_noise(self, cfg):
        run = extract_poi(scans_of([{1: -40}] * 3), cfg)
        assert run.clusters == ()
        assert run.noise == (0, 1, 2)

    def test_empty_scans_never_join(self, cfg):
        readings = [{1: -40, 2: -50}] * 4 + [{}]
        run = extract_poi(scans_of(readings), cfg)
        assert run.noise == (4,)

    def test_empty_input(self, cfg):
        run = extract_poi(ScanList("u1", ()), cfg)
        assert run.clusters == () and run.noise == ()

    def test_visits_split_on_gaps(self, cfg):
        readings = [{1: -40, 2: -50}] * 4 + [{5: -40}] * 4 + [{1: -40, 2: -50}] * 4
        run = extract_poi(scans_of(readings), cfg)
        home = run.clusters[0]
        assert home.visits == ((T0, T0 + 900), (T0 + 2400, T0 + 3300))
        assert home.dwell_s == 1800

    def test_one_scan_revisit_keeps_a_length(self, cfg):
        readings = [{1: -40, 2: -50}] * 4 + [{5: -40}] * 4 + [{1: -40, 2: -50}]
        home = extract_poi(scans_of(readings), cfg).clusters[0]
        assert home.visits == ((T0, T0 + 900), (T0 + 2250, T0 + 2550))
        assert all(TimeWindow(*visit).contains(visit[0]) for visit in home.visits)
        assert home.dwell_s == 1200

    def test_fixed_policy(self, cfg):
        # a shares half its energy with b
        readings = [{1: -50, 2: -50}] * 4 + [{1: -50, 3: -50}] * 4
        assert len(extract_poi(scans_of(readings), cfg).clusters) == 1
        assert len(extract_poi(scans_of(readings), cfg, policy=FixedThreshold(0.6)).clusters) == 2

    def test_neighbors_include_anchor(self, cfg):
        scans = scans_of([{1: -40}, {2: -40}, {1: -41}])
        assert neighbors_of(scans[0], scans, cfg) == [0, 2]
        assert neighbors_of(scans[1], scans, cfg, AdaptiveThreshold(cfg)) == [1]


class TestFingerprints:
    def test_mean_over_scans_that_heard_the_mac(self):
        scans = scans_of([{1: -40, 2: -60}, {1: -50}, {1: -60, 3: -90}])
        fp = fingerprint_of([0, 1, 2], scans)
        assert dict(fp.entries) == {mac(1): -50.0, mac(2): -60.0, mac(3): -90.0}

    def test_build_fingerprint_of_cluster(self):
        scans = scans_of([{1: -40}, {1: -60}])
        cluster = PoiCluster(0, (0, 1), fingerprint({1: -1}))
        assert build_fingerprint(cluster, scans).entries[mac(1)] == -50.0

    def test_empty_cluster(self):
        with pytest.raises(EmptyCluster):
            fingerprint_of([], scans_of([{1: -40}]))

    def test_split_visits(self):
        assert split_visits([], 600) == ()
        assert split_visits([0, 300, 600, 1500, 1800], 600) == ((0, 600), (1500, 1800))
        assert split_visits([0, 600], 600) == ((0, 600),)

    def test_single_scan_visit_is_padded(self):
        assert split_visits([0, 1500, 1800, 3000], 600, 150) == ((-150, 150), (1500, 1800), (2850, 3150))
        assert split_visits([0, 300], 600, 150) == ((0, 300),)


class TestRevisits:
    def test_match_picks_most_similar(self, cfg):
        known = [(0, fingerprint({1: -40, 2: -60})), (1, fingerprint({1: -40, 2: -61, 3: -90})),
                 (2, fingerprint({8: -40}))]
        assert match_revisit(fingerprint({1: -40, 2: -60}), known, cfg) == 0
        assert match_revisit(fingerprint({9: -40}), known, cfg) is None
        assert match_revisit(fingerprint({}), known, cfg) is None

    def test_ties_go_to_lowest_id(self, cfg):
        fp = fingerprint({1: -40, 2: -60})
        assert match_revisit(fp, [(5, fp), (3, fp)], cfg) == 3

    def test_duplicated_members_match_the_same_place(self, rng, cfg):
        for _ in range(40):
            scans = random_scans(rng, 60)
            run = extract_poi(scans, cfg)
            known = [(c.poi_id, c.fingerprint) for c in run.clusters]
            doubled = ScanList(scans.user_id, tuple(s for s in scans for _ in range(2)))
            for cluster in run.clusters:
                twice = fingerprint_of([2 * i + k for i in cluster.member_indices for k in range(2)], doubled)
                assert twice == cluster.fingerprint
                expected = match_revisit(cluster.fingerprint, known, cfg)
                assert match_revisit(twice, known, cfg) == expected
                assert match_revisit(twice, known + known, cfg) == expected
                assert match_revisit(twice, list(reversed(known)), cfg) == expected

    def test_registry_keeps_ids_across_runs(self, tmp_path, cfg):
        path = tmp_path / "registry.json"
        first = extract_poi(scans_of([{1: -40, 2: -50}] * 4 + [{5: -40, 6: -50}] * 4), cfg)
        registry = PoiRegistry(str(path))
        region = registry.region_for("u1", 1.3, 103.8, cfg.stay_radius_m)
        assert registry.reconcile(region, first, cfg) == {0: 0, 1: 1}
        registry.save()

        # next window: a new place first, then the second place again
        second = extract_poi(scans_of([{9: -40, 10: -50}] * 4 + [{5: -41, 6: -50}] * 4), cfg)
        reloaded = PoiRegistry(str(path))
        assert reloaded.digest() == registry.digest()
        region = reloaded.region_for("u1", 1.3001, 103.8, cfg.stay_radius_m)
        assert region.region_key == 0
        assert reloaded.reconcile(region, second, cfg) == {0: 2, 1: 1}

    def test_far_region_is_new(self, cfg):
        registry = PoiRegistry()
        a = registry.region_for("u1", 1.3, 103.8, cfg.stay_radius_m)
        b = registry.region_for("u1", 1.31, 103.8, cfg.stay_radius_m)
        assert (a.region_key, b.region_key) == (0, 1)
        registry.save()

    def test_each_known_poi_claimed_once(self, cfg):
        registry = PoiRegistry()
        region = registry.region_for("u1", 1.3, 103.8, cfg.stay_radius_m)
        registry.reconcile(region, extract_poi(scans_of([{1: -40, 2: -40, 3: -40}] * 4), cfg), cfg)
        # both halves resemble the known place; only the first may take its id
        halves = extract_poi(scans_of([{1: -40, 2: -40}] * 4 + [{1: -40, 3: -40}] * 4), cfg,
                             policy=FixedThreshold(0.9))
        assert len(halves.clusters) == 2
        assert registry.reconcile(region, halves, cfg) == {0: 0, 1: 1}

    def test_corrupt_registry(self, tmp_path):
        path = tmp_path / "registry.json"
        path.write_text("{not json")
        with pytest.raises(StoreError):
            PoiRegistry(str(path))
