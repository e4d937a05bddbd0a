import pytest

from model.types import (
    ApObservation, Fingerprint, GpsPoint, GpsTrack, PoiCluster, ScanList, ScanResult, StayPoint, TimeWindow,
)
from tests.factories import T0, fix, mac, scan
from utils.exceptions import MalformedMac, MissingTimestamp, OutOfRangeRss, ValidationError
from utils.validators import TraceValidator


class TestObservations:
    def test_valid_observation(self):
        obs = ApObservation("aabbccddeeff", -55)
        assert obs.rss == -55

    @pytest.mark.parametrize("bad", ["AABBCCDDEEFF", "aa:bb:cc:dd:ee:ff", "aabbccddee", "zzbbccddeeff", 12])
    def test_malformed_mac(self, bad):
        with pytest.raises(MalformedMac):
            ApObservation(bad, -60)

    @pytest.mark.parametrize("bad", [0, 5, -121, -60.5, True])
    def test_rss_out_of_range(self, bad):
        with pytest.raises(OutOfRangeRss):
            ApObservation("aabbccddeeff", bad)

    def test_rss_bounds(self):
        assert ApObservation("aabbccddeeff", -120).rss == -120
        assert ApObservation("aabbccddeeff", -1).rss == -1


class TestScans:
    def test_observations_sorted_by_mac(self):
        s = scan({5: -70, 1: -40, 3: -60})
        assert [o.mac for o in s.observations] == [mac(1), mac(3), mac(5)]
        assert s.n == 3

    def test_duplicate_mac_rejected(self):
        obs = (ApObservation(mac(1), -50), ApObservation(mac(1), -60))
        with pytest.raises(ValidationError):
            ScanResult(obs, T0)

    def test_empty_scan_is_allowed(self):
        s = ScanResult((), T0)
        assert s.n == 0
        assert s.fingerprint.p == 0

    def test_scan_list_must_be_time_ordered(self):
        with pytest.raises(ValidationError):
            ScanList("u1", (scan({1: -50}, T0 + 10), scan({1: -50}, T0)))

    def test_indices_within_closed_intervals(self):
        scans = ScanList("u1", tuple(scan({1: -50}, T0 + 100 * k) for k in range(10)))
        assert scans.indices_within([(T0 + 100, T0 + 300), (T0 + 800, T0 + 5000)]) == [1, 2, 3, 8, 9]
        assert scans.indices_within([]) == []


class TestFingerprint:
    def test_entries_are_read_only(self):
        fp = Fingerprint({mac(1): -50})
        with pytest.raises(TypeError):
            fp.entries[mac(2)] = -60

    def test_non_negative_rss_rejected(self):
        with pytest.raises(OutOfRangeRss):
            Fingerprint({mac(1): 0.0})

    def test_self_dot(self):
        fp = Fingerprint({mac(1): -3, mac(2): -4})
        assert fp.self_dot == 25
        assert fp.norm == 5
        assert fp.p == 2


class TestWindowsAndStays:
    def test_window_is_half_open(self):
        w = TimeWindow(10, 20)
        assert w.contains(10) and not w.contains(20)

    def test_empty_window_rejected(self):
        with pytest.raises(ValidationError):
            TimeWindow(20, 20)

    def test_clip(self):
        w = TimeWindow(10, 20)
        assert w.clip((0, 15)) == (10, 15)
        assert w.clip((25, 30)) is None

    def test_stay_must_have_positive_dwell(self):
        with pytest.raises(ValidationError):
            StayPoint(1.0, 103.0, T0, T0)
        assert StayPoint(None, None, T0, T0 + 60).has_position is False

    def test_display_id_is_one_based(self):
        cluster = PoiCluster(0, (0, 1), Fingerprint({mac(1): -50}), ((T0, T0 + 600),))
        assert cluster.display_id == "01"
        assert cluster.dwell_s == 600
        assert len(cluster) == 2


class TestGps:
    @pytest.mark.parametrize("lat,lon,acc", [(91, 0, 5), (0, 181, 5), (0, 0, 0)])
    def test_invalid_fix(self, lat, lon, acc):
        with pytest.raises(ValidationError):
            GpsPoint(lat, lon, acc, T0)

    def test_nearest_prefers_earlier_on_ties(self):
        track = GpsTrack("u1", (fix(1.0, 103.0, T0), fix(1.1, 103.0, T0 + 10)))
        assert track.nearest(T0 + 5).timestamp == T0

    def test_nearest_respects_tolerance_and_accuracy(self):
        track = GpsTrack("u1", (fix(1.0, 103.0, T0, acc=40), fix(1.1, 103.0, T0 + 200, acc=10)))
        assert track.nearest(T0, tolerance_s=100).timestamp == T0
        assert track.nearest(T0, tolerance_s=100, max_accuracy=25) is None
        assert track.nearest(T0, tolerance_s=300, max_accuracy=25).timestamp == T0 + 200

    def test_within(self):
        track = GpsTrack("u1", tuple(fix(1.0, 103.0, T0 + k) for k in range(5)))
        assert len(track.within(TimeWindow(T0 + 1, T0 + 3))) == 2


class TestTraceValidator:
    @pytest.mark.parametrize("raw", ["AA:BB:CC:DD:EE:FF", "aa-bb-cc-dd-ee-ff", "aabb.ccdd.eeff", " AABBCCDDEEFF "])
    def test_normalize_mac(self, raw):
        assert TraceValidator.normalize_mac(raw) == "aabbccddeeff"

    def test_strongest_reading_kept(self):
        s = TraceValidator.validate_scan([("AA:BB:CC:DD:EE:FF", -70), ("aabbccddeeff", -50)], T0)
        assert s.as_dict() == {"aabbccddeeff": -50}

    def test_whole_float_rss_accepted(self):
        s = TraceValidator.validate_scan({"aabbccddeeff": -50.0}, T0)
        assert s.as_dict() == {"aabbccddeeff": -50}

    @pytest.mark.parametrize("ts", [None, "yesterday", -1, float("nan")])
    def test_missing_timestamp(self, ts):
        with pytest.raises(MissingTimestamp):
            TraceValidator.validate_scan({"aabbccddeeff": -50}, ts)

    def test_bad_pairs(self):
        with pytest.raises(ValidationError):
            TraceValidator.validate_scan([("aabbccddeeff",)], T0)

    def test_fix(self):
        p = TraceValidator.validate_fix(1.3, 103.8, 12, T0)
        assert p.accuracy == 12.0
        with pytest.raises(ValidationError):
            TraceValidator.validate_fix(1.3, None, 12, T0)
