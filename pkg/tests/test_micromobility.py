import math

import pytest

from model.types import GpsTrack, ScanList, StayPoint
from tests.factories import T0, fix, scan, scans_of
from trajectory.micromobility import (
    RepresentativeMode, Trajectory, choose_representative, cluster_path, cluster_paths, distance_errors,
    extract_travel_windows, sweep_paths, sweep_threshold,
)
from utils.exceptions import DomainError, InsufficientGps
from utils.geo import haversine_m, offset_position

LAT, LON = 1.3, 103.8


def along(east_m: float):
    return offset_position(LAT, LON, 0.0, east_m)


def walk(readings, step_m=50.0, acc=10.0):
    """Scans every 300 s, each with a fix three seconds later ``step_m`` further east."""
    scans = scans_of(readings)
    fixes = tuple(fix(*along(k * step_m), T0 + k * 300 + 3, acc=acc) for k in range(len(readings)))
    return scans, GpsTrack("u1", fixes)


class TestRepresentative:
    def test_mean_of_accurate_fixes(self, cfg):
        fixes = [fix(*along(0), T0, acc=10), fix(*along(20), T0 + 300, acc=20), fix(*along(500), T0 + 600, acc=40)]
        rep, mode, used = choose_representative(fixes, cfg)
        assert mode is RepresentativeMode.AVERAGED_HIGH_ACCURACY
        assert [f.accuracy for f in used] == [10, 20]
        assert haversine_m(rep.latitude, rep.longitude, *along(10)) < 0.01
        assert rep.accuracy == 15

    def test_best_of_inaccurate_fixes(self, cfg):
        fixes = [fix(*along(0), T0, acc=60), fix(*along(20), T0 + 300, acc=40)]
        rep, mode, used = choose_representative(fixes, cfg)
        assert mode is RepresentativeMode.BEST_OF_LOW_ACCURACY
        assert rep == fixes[1]
        assert used == (fixes[1],)

    def test_cutoff_is_inclusive(self, cfg):
        rep, mode, _ = choose_representative([fix(*along(0), T0, acc=25.0)], cfg)
        assert mode is RepresentativeMode.AVERAGED_HIGH_ACCURACY


class TestTravelWindows:
    def test_samples_inside_stays_are_dropped(self):
        scans, track = walk([{1: -50}] * 10)
        stays = [StayPoint(LAT, LON, T0, T0 + 900), StayPoint(LAT, LON, T0 + 2400, T0 + 2703)]
        moving_track, moving_scans = extract_travel_windows(stays, track, scans)
        assert moving_scans.timestamps == [T0 + 1200, T0 + 1500, T0 + 1800, T0 + 2100]
        assert [p.timestamp for p in moving_track] == [T0 + 903, T0 + 1203, T0 + 1503, T0 + 1803, T0 + 2103]

    def test_samples_before_first_and_after_last_stay_are_dropped(self):
        scans, track = walk([{1: -50}] * 12)
        stays = [StayPoint(LAT, LON, T0 + 1800, T0 + 2100), StayPoint(LAT, LON, T0 + 300, T0 + 600)]
        moving_track, moving_scans = extract_travel_windows(stays, track, scans)
        assert moving_scans.timestamps == [T0 + 900, T0 + 1200, T0 + 1500]
        assert [p.timestamp for p in moving_track] == [T0 + 603, T0 + 903, T0 + 1203, T0 + 1503]

    def test_single_stay_leaves_no_travel(self):
        scans, track = walk([{1: -50}] * 6)
        moving_track, moving_scans = extract_travel_windows([StayPoint(LAT, LON, T0 + 600, T0 + 900)], track, scans)
        assert len(moving_scans) == 0
        assert len(moving_track) == 0

    def test_no_stays(self):
        scans, track = walk([{1: -50}] * 3)
        assert extract_travel_windows([], track, scans) == (track, scans)


class TestClusterPaths:
    def test_threshold_one_keeps_distinct_scans_apart(self, cfg):
        readings = [{1: -40 - k, 2: -70 + k} for k in range(12)]
        scans, track = walk(readings)
        clusters = cluster_path(scans, track, cfg, eps=1.0)
        assert len(clusters) == len(scans)
        assert all(len(c) == 1 for c in clusters)

    def test_every_scan_lands_in_a_cluster(self, cfg):
        readings = [{1: -40, 2: -50}] * 3 + [{5: -40}] * 3 + [{}] + [{1: -45, 2: -50}] * 2
        scans, track = walk(readings)
        clusters = cluster_path(scans, track, cfg)
        members = sorted(i for c in clusters for i in c.member_indices)
        assert members == list(range(len(scans)))
        assert [c.member_indices for c in clusters] == [(0, 1, 2, 7, 8), (3, 4, 5), (6,)]

    def test_representative_from_nearest_fixes(self, cfg):
        scans, track = walk([{1: -40}] * 3, step_m=10.0)
        (cluster,) = cluster_path(scans, track, cfg)
        assert cluster.mode is RepresentativeMode.AVERAGED_HIGH_ACCURACY
        assert haversine_m(cluster.representative.latitude, cluster.representative.longitude, *along(10)) < 0.01

    def test_inaccurate_path_uses_best_fix(self, cfg):
        scans, track = walk([{1: -40}] * 3, acc=40.0)
        (cluster,) = cluster_path(scans, track, cfg)
        assert cluster.mode is RepresentativeMode.BEST_OF_LOW_ACCURACY
        assert cluster.representative == track[0]

    def test_no_gps(self, cfg, empty_track):
        with pytest.raises(InsufficientGps):
            cluster_path(scans_of([{1: -40}]), empty_track, cfg)

    def test_empty(self, cfg, empty_track):
        assert cluster_path(ScanList("u1", ()), empty_track, cfg) == []

    def test_pooled_users(self, cfg):
        a_scans, a_track = walk([{1: -40}] * 2)
        b_scans = ScanList("u2", (scan({1: -41}, T0 + 150),))
        b_track = GpsTrack("u2", (fix(*along(5), T0 + 153),))
        trajectory = Trajectory.pooled([(a_scans, a_track), (b_scans, b_track)])
        assert trajectory.owners == ("u1", "u2", "u1")
        (cluster,) = cluster_paths(trajectory, cfg)
        assert cluster.owners == ("u1", "u2")


class TestSweep:
    def test_rows_follow_thresholds(self, cfg):
        readings = [{1: -40, 2: -60}, {1: -42, 2: -58, 3: -80}, {3: -50, 4: -60}, {4: -55, 5: -60}, {5: -50}]
        scans, track = walk(readings * 3)
        rows = sweep_threshold(scans, track, [0.2, 0.5, 0.8, 1.0], cfg)
        assert [r.eps for r in rows] == [0.2, 0.5, 0.8, 1.0]
        counts = [r.cluster_count for r in rows]
        assert counts == sorted(counts)
        for row in rows:
            assert row.compression_ratio == pytest.approx(len(scans) / row.cluster_count)

    def test_matches_direct_clustering(self, cfg):
        readings = [{1: -40, 2: -60}, {2: -50, 3: -60}, {3: -40}, {9: -40}]
        scans, track = walk(readings * 2)
        (row,) = sweep_threshold(scans, track, [0.3], cfg)
        clusters = cluster_path(scans, track, cfg, eps=0.3)
        trajectory = Trajectory.single(scans, track)
        errors = distance_errors(trajectory, clusters, cfg)
        assert row.cluster_count == len(clusters)
        assert row.avg_distance_error_m == pytest.approx(math.fsum(errors) / len(errors))

    def test_empty_trajectory(self, cfg, empty_track):
        (row,) = sweep_threshold(ScanList("u1", ()), empty_track, [0.3], cfg)
        assert row.cluster_count == 0
        assert math.isnan(row.avg_distance_error_m)

    def test_unmatched_scans_are_skipped(self, cfg):
        scans = scans_of([{1: -40}] * 2)
        track = GpsTrack("u1", (fix(LAT, LON, T0 + 3),))
        (row,) = sweep_threshold(scans, track, [0.3], cfg)
        assert row.avg_distance_error_m == 0.0

    @pytest.mark.parametrize("values", [[], [0.0], [1.2]])
    def test_domain(self, cfg, values):
        scans, track = walk([{1: -40}])
        with pytest.raises(DomainError):
            sweep_paths(Trajectory.single(scans, track), values, cfg)

    def test_parallel_matches_serial(self, cfg):
        readings = [{1: -40, 2: -60}, {2: -50, 3: -60}, {3: -40}, {9: -40}]
        scans, track = walk(readings * 3)
        serial = sweep_threshold(scans, track, [0.2, 0.4, 0.9], cfg)
        parallel = sweep_threshold(scans, track, [0.2, 0.4, 0.9], cfg.with_overrides(n_jobs=2))
        assert [r.cluster_count for r in serial] == [r.cluster_count for r in parallel]
