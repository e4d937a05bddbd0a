"""Neighbourhood activity: GPS stay regions fused with WiFi clusters.

A GPS stay region around home hides the short trips a user makes inside it
(a void deck, a shop downstairs). Clustering the WiFi scans taken while the
user was "at home" by GPS splits those visits back out. Fixes that belong to
no stay are binned into a heatmap of movement.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from clustering.similarity import compute_threshold, cosine_similarity
from clustering.wifi_cluster import ClusterRun, extract_poi
from model.config import PipelineConfig
from model.types import GpsPoint, GpsTrack, Interval, PoiCluster, ScanList, StayPoint, StaySource, TimeWindow
from trajectory.gps_pipeline import GeoCluster, clean_track, cluster_stay_points, extract_stay_points
from utils.exceptions import NoStayPoints
from utils.geo import equirectangular_inverse, equirectangular_xy, mean_position
from utils.log import logger

Cell = Tuple[int, int]


@dataclass(frozen=True)
class Heatmap:
    """Counts of fixes per square cell of ``cell_m`` meters."""
    cell_m: float
    ref_lat: float
    cells: Dict[Cell, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.cells.values())

    def cell_polygon(self, cell: Cell) -> List[List[float]]:
        """Closed ring of ``[lon, lat]`` corners of a cell."""
        col, row = cell
        corners = [(col, row), (col + 1, row), (col + 1, row + 1), (col, row + 1), (col, row)]
        ring = []
        for cx, cy in corners:
            lat, lon = equirectangular_inverse(cx * self.cell_m, cy * self.cell_m, self.ref_lat)
            ring.append([lon, lat])
        return ring


@dataclass(frozen=True)
class NeighborhoodPoi:
    stay: StayPoint
    cluster: PoiCluster
    home_similarity: float


@dataclass(frozen=True)
class NeighborhoodReport:
    user_id: str
    home: StayPoint
    home_cluster: Optional[PoiCluster]
    neighborhood_pois: Tuple[NeighborhoodPoi, ...]
    heatmap: Heatmap
    moving_points_total: int
    gps_place_count: int
    run: Optional[ClusterRun] = None

    @property
    def place_count(self) -> int:
        """Places found by fusion inside the home region, home included."""
        return 1 + len(self.neighborhood_pois)


def identify_home(stays: Sequence[GeoCluster]) -> GeoCluster:
    """
    Pick the stay region with the longest total dwell.

    Args:
        stays (Sequence[GeoCluster]): Stay regions of one user

    Returns:
        GeoCluster: The home region; ties go to the earliest first arrival

    Raises:
        NoStayPoints: If there is no stay region
    """
    if not stays:
        raise NoStayPoints("cannot identify home without stay regions")
    return min(stays, key=lambda c: (-c.total_dwell, c.first_arrival, c.cluster_id))


def build_heatmap(points: Sequence[GpsPoint], cfg: PipelineConfig) -> Heatmap:
    """
    Bin fixes into square cells.

    Projection is equirectangular at the mean latitude of ``points``.

    Args:
        points (Sequence[GpsPoint]): Fixes to bin
        cfg (PipelineConfig): Pipeline configuration (``heatmap_cell_m``)

    Returns:
        Heatmap: Cell -> count; the counts sum to ``len(points)``
    """
    if not points:
        return Heatmap(cfg.heatmap_cell_m, 0.0, {})
    ref_lat = math.fsum(p.latitude for p in points) / len(points)
    counts: Counter = Counter()
    for p in points:
        x, y = equirectangular_xy(p.latitude, p.longitude, ref_lat)
        counts[(math.floor(x / cfg.heatmap_cell_m), math.floor(y / cfg.heatmap_cell_m))] += 1
    return Heatmap(cfg.heatmap_cell_m, ref_lat, dict(sorted(counts.items())))


def _covered(t: int, intervals: Sequence[Interval]) -> bool:
    return any(lo <= t <= hi for lo, hi in intervals)


def _overlaps(interval: Interval, intervals: Sequence[Interval]) -> bool:
    return any(interval[0] < hi and lo < interval[1] for lo, hi in intervals)


def anchor_position(cluster: PoiCluster, scans: ScanList, track: GpsTrack,
                    cfg: PipelineConfig) -> Optional[Tuple[float, float]]:
    """Mean of the accurate fixes nearest to a cluster's scans, None when there are none."""
    tolerance = cfg.fusion_match_intervals * cfg.scan_interval_s
    fixes = []
    for i in cluster.member_indices:
        fix = track.nearest(scans[i].timestamp, tolerance_s=tolerance, max_accuracy=cfg.gps_accuracy_max)
        if fix is not None:
            fixes.append((fix.latitude, fix.longitude))
    return mean_position(fixes) if fixes else None


def extract_neighborhood(track: GpsTrack, scans: ScanList, home: GeoCluster,
                         window: TimeWindow, cfg: PipelineConfig) -> NeighborhoodReport:
    """
    Split the home stay region into home and neighbourhood places.

    Args:
        track (GpsTrack): Raw fixes of the user
        scans (ScanList): Scans of the user
        home (GeoCluster): The user's home stay region
        window (TimeWindow): Period to analyse
        cfg (PipelineConfig): Pipeline configuration

    Returns:
        NeighborhoodReport: Home, neighbourhood POIs and the movement heatmap
    """
    occupancy = [iv for iv in (window.clip(s) for s in home.intervals) if iv is not None]
    indices = [i for i in scans.indices_within(occupancy) if window.contains(scans[i].timestamp)]
    home_scans = scans.select(indices)
    run = extract_poi(home_scans, cfg)

    home_cluster = None
    if run.clusters:
        home_cluster = min(run.clusters, key=lambda c: (-c.dwell_s, c.poi_id))

    pois: List[NeighborhoodPoi] = []
    home_like: List[PoiCluster] = []
    short_visits = 0
    for cluster in run.clusters:
        if cluster is home_cluster:
            continue
        similarity = cosine_similarity(cluster.fingerprint, home_cluster.fingerprint)
        if similarity >= compute_threshold(cluster.fingerprint, home_cluster.fingerprint, cfg):
            home_like.append(cluster)
            continue
        arrive, depart = max(cluster.visits, key=lambda v: (v[1] - v[0], -v[0]))
        if depart - arrive < cfg.min_dwell_s:
            short_visits += 1
            continue
        position = anchor_position(cluster, home_scans, track, cfg)
        lat, lon = position if position else (None, None)
        stay = StayPoint(lat, lon, arrive, depart, StaySource.FUSED, f"poi-{cluster.display_id}")
        pois.append(NeighborhoodPoi(stay, cluster, similarity))

    # home stay: the home WiFi cluster's span when there is one, else the GPS occupancy
    home_lat, home_lon = home.centroid
    span = home_cluster.visits if home_cluster else (occupancy or home.intervals)
    arrive, depart = min(lo for lo, _ in span), max(hi for _, hi in span)
    if depart <= arrive:
        arrive, depart = home.first_arrival, max(hi for _, hi in home.intervals)
    home_stay = StayPoint(home_lat, home_lon, arrive, depart,
                          StaySource.FUSED if home_cluster else StaySource.GPS, "home")

    # fixes covered by a stay never count as movement
    pad = cfg.scan_interval_s / 2
    covered: List[Interval] = []
    gps_stays = [s for s in extract_stay_points(clean_track(track, cfg), cfg)
                 if window.clip(s.interval) is not None]
    home_intervals = set(home.intervals)
    covered.extend(s.interval for s in gps_stays if s.interval not in home_intervals)
    if home_cluster:
        for cluster in (home_cluster, *home_like):
            covered.extend((lo - pad, hi + pad) for lo, hi in cluster.visits)
        for poi in pois:
            covered.append((poi.stay.arrive - pad, poi.stay.depart + pad))
    else:
        covered.extend(occupancy)
    moving = [p for p in track.within(window) if not _covered(p.timestamp, covered)]
    heatmap = build_heatmap(moving, cfg)

    # places GPS alone tells apart while the user is in the home region
    during_home = [s for s in gps_stays if _overlaps(s.interval, occupancy)]
    gps_place_count = len(cluster_stay_points(during_home, cfg))
    logger.info("neighborhood extracted", {
        "user": scans.user_id, "home_scans": len(home_scans), "wifi_clusters": len(run.clusters),
        "neighborhood_pois": len(pois), "short_visits": short_visits, "moving_points": len(moving),
    })
    return NeighborhoodReport(
        user_id=scans.user_id or track.user_id,
        home=home_stay,
        home_cluster=home_cluster,
        neighborhood_pois=tuple(pois),
        heatmap=heatmap,
        moving_points_total=len(moving),
        gps_place_count=gps_place_count,
        run=run,
    )
