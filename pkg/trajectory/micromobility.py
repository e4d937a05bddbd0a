"""Micro-mobility: simplifying travel paths with in-transit WiFi scans.

Scans taken between stays are clustered with a fixed similarity threshold and
``minPts = 1``, so every scan lands in a cluster. Each cluster collapses to one
representative GPS point: the mean of the high-accuracy fixes matched to its
scans, or the single most accurate fix when none is good enough.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from clustering.similarity import FixedThreshold, similarity_matrix
from clustering.wifi_cluster import density_clusters, neighbors_of
from model.config import PipelineConfig
from model.types import GpsPoint, GpsTrack, Interval, ScanList, StayPoint
from utils.exceptions import DomainError, InsufficientGps
from utils.geo import haversine_m, mean_position
from utils.log import logger

POOLED_USER = "*"


class RepresentativeMode(str, Enum):
    AVERAGED_HIGH_ACCURACY = "averaged_high_accuracy"
    BEST_OF_LOW_ACCURACY = "best_of_low_accuracy"


@dataclass(frozen=True)
class PathCluster:
    """A cluster of trajectory scans collapsed to one GPS point."""
    member_indices: Tuple[int, ...]
    representative: GpsPoint
    mode: RepresentativeMode
    contributing: Tuple[GpsPoint, ...]
    owners: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True)
class Trajectory:
    """Trajectory scans, possibly of several users, with each scan's GPS track."""
    scans: ScanList
    owners: Tuple[str, ...]
    tracks: Dict[str, GpsTrack]

    def track_of(self, index: int) -> GpsTrack:
        return self.tracks[self.owners[index]]

    @classmethod
    def single(cls, scans: ScanList, track: GpsTrack) -> "Trajectory":
        user = scans.user_id
        return cls(scans, tuple(user for _ in scans), {user: track})

    @classmethod
    def pooled(cls, parts: Sequence[Tuple[ScanList, GpsTrack]]) -> "Trajectory":
        """Merge users by timestamp; ties keep the order of ``parts``."""
        tagged = sorted(
            ((scan.timestamp, order, k, scan, scans.user_id)
             for order, (scans, _) in enumerate(parts) for k, scan in enumerate(scans)),
            key=lambda item: item[:3],
        )
        merged = ScanList(POOLED_USER, tuple(item[3] for item in tagged))
        owners = tuple(item[4] for item in tagged)
        return cls(merged, owners, {scans.user_id: track for scans, track in parts})


@dataclass(frozen=True)
class SweepRow:
    eps: float
    cluster_count: int
    avg_distance_error_m: float
    mean_representative_accuracy_m: float
    compression_ratio: float


def extract_travel_windows(stays: Sequence[StayPoint], track: GpsTrack,
                           scans: ScanList) -> Tuple[GpsTrack, ScanList]:
    """
    Samples taken strictly between consecutive stays.

    Samples before the first stay and after the last one are not travel.
    Without any stay the whole trace is returned.

    Args:
        stays (Sequence[StayPoint]): Stays of the user
        track (GpsTrack): All fixes of the user
        scans (ScanList): All scans of the user

    Returns:
        Tuple[GpsTrack, ScanList]: Trajectory fixes and trajectory scans
    """
    if not stays:
        return track, scans
    intervals: List[Interval] = sorted(s.interval for s in stays)
    windows = [(prev[1], nxt[0]) for prev, nxt in zip(intervals, intervals[1:])]

    def moving(t: int) -> bool:
        return (any(lo < t < hi for lo, hi in windows)
                and not any(lo <= t <= hi for lo, hi in intervals))

    return (
        GpsTrack(track.user_id, tuple(p for p in track if moving(p.timestamp))),
        ScanList(scans.user_id, tuple(s for s in scans if moving(s.timestamp))),
    )


def choose_representative(fixes: Sequence[GpsPoint], cfg: PipelineConfig) -> Tuple[GpsPoint, RepresentativeMode, Tuple[GpsPoint, ...]]:
    """
    Collapse matched fixes into one representative point.

    Args:
        fixes (Sequence[GpsPoint]): Distinct fixes matched to a cluster's scans
        cfg (PipelineConfig): Pipeline configuration (``gps_accuracy_max``)

    Returns:
        Tuple: The representative, how it was chosen, and the fixes it came from
    """
    good = tuple(f for f in fixes if f.accuracy <= cfg.gps_accuracy_max)
    if good:
        lat, lon = mean_position((f.latitude, f.longitude) for f in good)
        accuracy = math.fsum(f.accuracy for f in good) / len(good)
        representative = GpsPoint(lat, lon, accuracy, min(f.timestamp for f in good))
        return representative, RepresentativeMode.AVERAGED_HIGH_ACCURACY, good
    best = min(fixes, key=lambda f: (f.accuracy, f.timestamp))
    return best, RepresentativeMode.BEST_OF_LOW_ACCURACY, (best,)


def _check_gps(trajectory: Trajectory) -> None:
    for user in sorted(set(trajectory.owners)):
        if not len(trajectory.tracks[user]):
            raise InsufficientGps(f"user {user} has trajectory scans but no GPS fix")


def _clusters(trajectory: Trajectory, cfg: PipelineConfig, eps: float,
              sims: Optional[np.ndarray]) -> List[PathCluster]:
    scans = trajectory.scans
    if sims is not None:
        def region_query(i: int) -> List[int]:
            return [j for j in range(len(scans)) if i == j or sims[i, j] >= eps]
    else:
        policy = FixedThreshold(eps)

        def region_query(i: int) -> List[int]:
            return neighbors_of(scans[i], scans, cfg, policy)

    member_lists, _ = density_clusters(len(scans), region_query, cfg.min_pts_micro)
    clusters = []
    for members in member_lists:
        fixes: Dict[int, GpsPoint] = {}
        for i in members:
            fix = trajectory.track_of(i).nearest(scans[i].timestamp)
            fixes.setdefault(id(fix), fix)
        representative, mode, contributing = choose_representative(list(fixes.values()), cfg)
        owners = tuple(sorted({trajectory.owners[i] for i in members}))
        clusters.append(PathCluster(tuple(members), representative, mode, contributing, owners))
    return clusters


def cluster_paths(trajectory: Trajectory, cfg: PipelineConfig, eps: Optional[float] = None,
                  similarities: Optional[np.ndarray] = None) -> List[PathCluster]:
    """
    Cluster trajectory scans and pick a representative per cluster.

    Args:
        trajectory (Trajectory): Trajectory scans with their GPS tracks
        cfg (PipelineConfig): Pipeline configuration
        eps (Optional[float]): Similarity threshold; ``micromobility_eps`` by default
        similarities (Optional[np.ndarray]): Precomputed pairwise similarities

    Returns:
        List[PathCluster]: Clusters in discovery order

    Raises:
        InsufficientGps: If a user with trajectory scans has no fix
    """
    if not len(trajectory.scans):
        return []
    _check_gps(trajectory)
    return _clusters(trajectory, cfg, cfg.micromobility_eps if eps is None else eps, similarities)


def cluster_path(scans: ScanList, track: GpsTrack, cfg: PipelineConfig,
                 eps: Optional[float] = None) -> List[PathCluster]:
    """Single-user form of :func:`cluster_paths`."""
    return cluster_paths(Trajectory.single(scans, track), cfg, eps)


def distance_errors(trajectory: Trajectory, clusters: Sequence[PathCluster],
                    cfg: PipelineConfig) -> List[float]:
    """
    Distance from each scan's own fix to its cluster's representative.

    Scans with no fix within ``gps_match_tolerance_s`` are skipped.
    """
    errors = []
    for cluster in clusters:
        rep = cluster.representative
        for i in cluster.member_indices:
            fix = trajectory.track_of(i).nearest(trajectory.scans[i].timestamp,
                                                 tolerance_s=cfg.gps_match_tolerance_s)
            if fix is not None:
                errors.append(haversine_m(fix.latitude, fix.longitude, rep.latitude, rep.longitude))
    return errors


def _sweep_one(trajectory: Trajectory, eps: float, sims: np.ndarray, cfg: PipelineConfig) -> SweepRow:
    clusters = _clusters(trajectory, cfg, eps, sims)
    errors = distance_errors(trajectory, clusters, cfg)
    accuracies = [f.accuracy for c in clusters if c.mode is RepresentativeMode.AVERAGED_HIGH_ACCURACY
                  for f in c.contributing]
    return SweepRow(
        eps=eps,
        cluster_count=len(clusters),
        avg_distance_error_m=math.fsum(errors) / len(errors) if errors else math.nan,
        mean_representative_accuracy_m=math.fsum(accuracies) / len(accuracies) if accuracies else math.nan,
        compression_ratio=len(trajectory.scans) / len(clusters) if clusters else math.nan,
    )


def sweep_paths(trajectory: Trajectory, eps_values: Sequence[float], cfg: PipelineConfig) -> List[SweepRow]:
    """
    Cluster count and distance error for each threshold.

    The similarity matrix is computed once and shared by every run; runs fan
    out over ``cfg.n_jobs`` workers.

    Raises:
        DomainError: If ``eps_values`` is empty or a value lies outside (0, 1]
        InsufficientGps: If a user with trajectory scans has no fix
    """
    if not eps_values:
        raise DomainError("threshold sweep needs at least one eps value")
    for eps in eps_values:
        if not 0.0 < eps <= 1.0:
            raise DomainError(f"eps must lie in (0, 1], got {eps}")
    if len(trajectory.scans):
        _check_gps(trajectory)
    sims = similarity_matrix(trajectory.scans.scans)
    rows = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_sweep_one)(trajectory, eps, sims, cfg) for eps in eps_values
    )
    logger.debug("threshold sweep finished", {"scans": len(trajectory.scans), "eps_values": list(eps_values)})
    return list(rows)


def sweep_threshold(scans: ScanList, track: GpsTrack, eps_values: Sequence[float],
                    cfg: PipelineConfig) -> List[SweepRow]:
    """Single-user form of :func:`sweep_paths`."""
    return sweep_paths(Trajectory.single(scans, track), eps_values, cfg)