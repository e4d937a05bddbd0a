"""GPS cleaning, stay-point extraction and geographic grouping of stay points."""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np
from sklearn.cluster import DBSCAN

from model.config import PipelineConfig
from model.types import GpsPoint, GpsTrack, Interval, StayPoint, StaySource
from utils.geo import EARTH_RADIUS_M, haversine_m, mean_position
from utils.log import logger


@dataclass(frozen=True)
class GeoCluster:
    """A GPS stay region: stay points grouped by location."""
    cluster_id: int
    stay_points: Tuple[StayPoint, ...]

    @cached_property
    def centroid(self) -> Tuple[float, float]:
        return mean_position((s.latitude, s.longitude) for s in self.stay_points)

    @property
    def total_dwell(self) -> int:
        return sum(s.dwell for s in self.stay_points)

    @property
    def first_arrival(self) -> int:
        return min(s.arrive for s in self.stay_points)

    @property
    def intervals(self) -> List[Interval]:
        return [s.interval for s in self.stay_points]


def clean_track(track: GpsTrack, cfg: PipelineConfig) -> GpsTrack:
    """
    Drop low-accuracy, repeated and implausibly fast fixes.

    Each fix is checked against the last fix kept so far, so cleaning an
    already clean track changes nothing.

    Args:
        track (GpsTrack): Raw fixes
        cfg (PipelineConfig): Pipeline configuration

    Returns:
        GpsTrack: Remaining fixes in their original order, timestamps strictly increasing
    """
    kept: List[GpsPoint] = []
    dropped = {"accuracy": 0, "repeat": 0, "speed": 0}
    for point in track:
        if point.accuracy > cfg.gps_accuracy_filter:
            dropped["accuracy"] += 1
            continue
        if kept:
            prev = kept[-1]
            dt = point.timestamp - prev.timestamp
            if (point.latitude, point.longitude) == (prev.latitude, prev.longitude) or dt <= 0:
                dropped["repeat"] += 1
                continue
            if haversine_m(prev.latitude, prev.longitude, point.latitude, point.longitude) / dt > cfg.max_speed_mps:
                dropped["speed"] += 1
                continue
        kept.append(point)
    logger.debug("gps track cleaned", {"user": track.user_id, "kept": len(kept), **dropped})
    return GpsTrack(track.user_id, tuple(kept))


def _stay_from(points: List[GpsPoint]) -> StayPoint:
    lat, lon = mean_position((p.latitude, p.longitude) for p in points)
    return StayPoint(lat, lon, points[0].timestamp, points[-1].timestamp, StaySource.GPS)


def _within_centroid(points: List[GpsPoint], radius_m: float) -> bool:
    lat, lon = mean_position((p.latitude, p.longitude) for p in points)
    return all(haversine_m(lat, lon, p.latitude, p.longitude) <= radius_m for p in points)


def extract_stay_points(track: GpsTrack, cfg: PipelineConfig) -> List[StayPoint]:
    """
    Sliding-window stay-point extraction.

    From each anchor the window grows while fixes stay within ``stay_radius_m``
    of the anchor. A window spanning at least ``min_dwell_s`` becomes a stay
    point at its mean position; its tail is trimmed until every member also
    lies within the radius of that mean.

    Args:
        track (GpsTrack): A cleaned track
        cfg (PipelineConfig): Pipeline configuration

    Returns:
        List[StayPoint]: Temporally ordered, disjoint stay points
    """
    points = track.points
    n = len(points)
    stays: List[StayPoint] = []
    i = 0
    while i < n:
        anchor = points[i]
        j = i + 1
        while j < n and haversine_m(anchor.latitude, anchor.longitude,
                                    points[j].latitude, points[j].longitude) <= cfg.stay_radius_m:
            j += 1
        window = list(points[i:j])
        while len(window) > 1 and not _within_centroid(window, cfg.stay_radius_m):
            window.pop()
        if window[-1].timestamp - window[0].timestamp >= cfg.min_dwell_s:
            stays.append(_stay_from(window))
            i += len(window)
        else:
            i += 1
    return stays


def cluster_stay_points(stays: List[StayPoint], cfg: PipelineConfig) -> List[GeoCluster]:
    """
    Group stay points into stay regions with haversine DBSCAN.

    Noise stays become singleton regions. Region ids follow the first
    appearance of a region in ``stays``.

    Args:
        stays (List[StayPoint]): Stay points with coordinates
        cfg (PipelineConfig): Pipeline configuration

    Returns:
        List[GeoCluster]: Regions ordered by id
    """
    located = [s for s in stays if s.has_position]
    if not located:
        return []
    coords = np.radians([[s.latitude, s.longitude] for s in located])
    labels = DBSCAN(
        eps=cfg.geo_eps_m / EARTH_RADIUS_M,
        min_samples=cfg.geo_minpts,
        metric="haversine",
        algorithm="ball_tree",
    ).fit(coords).labels_

    groups: Dict[Tuple[str, int], List[StayPoint]] = {}
    for index, (stay, label) in enumerate(zip(located, labels)):
        key = ("noise", index) if label == -1 else ("cluster", int(label))
        groups.setdefault(key, []).append(stay)
    return [GeoCluster(cluster_id, tuple(members)) for cluster_id, members in enumerate(groups.values())]
