"""Tabular and GeoJSON renderings of pipeline results.

Column lists and feature properties are a stable contract; see the README.
"""

from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from clustering.community import Partition, PoiNode
from model.config import PipelineConfig
from model.types import GpsTrack, StayPoint
from trajectory.fusion import Heatmap, NeighborhoodReport, anchor_position
from trajectory.micromobility import PathCluster, SweepRow, Trajectory
from trajectory.pois import UserPois

POI_COLUMNS = ["user", "region_id", "poi_id", "date", "start_time", "end_time", "dwell_s", "scans"]
COMMUNITY_COLUMNS = ["user", "region_id", "poi_id", "community"]
SWEEP_COLUMNS = ["eps", "cluster_count", "avg_distance_error_m", "mean_representative_accuracy_m",
                 "compression_ratio"]

COORD_DIGITS = 7


def _local(timestamps: Sequence[int], tz_offset_hours: float) -> pd.DatetimeIndex:
    return pd.to_datetime(list(timestamps), unit="s", utc=True) + pd.Timedelta(hours=tz_offset_hours)


def poi_table(results: Sequence[UserPois], cfg: PipelineConfig) -> pd.DataFrame:
    """
    One row per POI visit.

    Args:
        results (Sequence[UserPois]): Per-user POI extraction results
        cfg (PipelineConfig): Supplies ``tz_offset_hours`` for dates and times

    Returns:
        pd.DataFrame: Rows ordered by user, region, arrival and poi id
    """
    rows: List[Dict[str, Any]] = []
    for result in results:
        for region in result.regions:
            timestamps = region.scans.timestamps
            for cluster in region.clusters:
                members = [timestamps[i] for i in cluster.member_indices]
                for arrive, depart in cluster.visits:
                    rows.append({
                        "user": result.user_id,
                        "region_id": region.region_id,
                        "poi_id": cluster.display_id,
                        "arrive": arrive,
                        "depart": depart,
                        "dwell_s": depart - arrive,
                        "scans": sum(1 for t in members if arrive <= t <= depart),
                    })
    if not rows:
        return pd.DataFrame(columns=POI_COLUMNS)
    frame = pd.DataFrame(rows).sort_values(["user", "region_id", "arrive", "poi_id"], kind="mergesort")
    start = _local(frame["arrive"], cfg.tz_offset_hours)
    end = _local(frame["depart"], cfg.tz_offset_hours)
    frame["date"] = start.strftime("%Y-%m-%d")
    frame["start_time"] = start.strftime("%H:%M:%S")
    frame["end_time"] = end.strftime("%H:%M:%S")
    return frame[POI_COLUMNS].reset_index(drop=True)


def community_table(nodes: Sequence[PoiNode], partition: Partition) -> pd.DataFrame:
    rows = [
        {"user": node.user_id, "region_id": node.region_id, "poi_id": f"{node.poi_id + 1:02d}",
         "community": community}
        for node, community in zip(nodes, partition.membership)
    ]
    return pd.DataFrame(rows, columns=COMMUNITY_COLUMNS)


def sweep_table(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([{name: getattr(row, name) for name in SWEEP_COLUMNS} for row in rows],
                        columns=SWEEP_COLUMNS)


def _point(lat: Optional[float], lon: Optional[float]) -> Optional[Dict[str, Any]]:
    if lat is None or lon is None:
        return None
    return {"type": "Point", "coordinates": [round(lon, COORD_DIGITS), round(lat, COORD_DIGITS)]}


def _feature(geometry: Optional[Dict[str, Any]], **properties: Any) -> Dict[str, Any]:
    return {"type": "Feature", "geometry": geometry, "properties": properties}


def poi_features(results: Sequence[UserPois], tracks: Dict[str, GpsTrack],
                 cfg: PipelineConfig) -> List[Dict[str, Any]]:
    """Point per POI at its accurate-fix anchor, or at its region centroid."""
    features = []
    for result in results:
        for region in result.regions:
            for cluster in region.clusters:
                position = anchor_position(cluster, region.scans, tracks[result.user_id], cfg)
                lat, lon = position if position else region.region.centroid
                features.append(_feature(
                    _point(lat, lon), kind="poi", user=result.user_id, region_id=region.region_id,
                    poi_id=cluster.display_id, dwell_s=cluster.dwell_s, visits=len(cluster.visits),
                    source="fused" if position else "gps",
                ))
    return features


def _stay_feature(kind: str, user: str, stay: StayPoint, **extra: Any) -> Dict[str, Any]:
    return _feature(_point(stay.latitude, stay.longitude), kind=kind, user=user,
                    dwell_s=stay.dwell, source=stay.source.value, **extra)


def _heatmap_features(user: str, heatmap: Heatmap) -> List[Dict[str, Any]]:
    features = []
    for cell, count in heatmap.cells.items():
        ring = [[round(lon, COORD_DIGITS), round(lat, COORD_DIGITS)] for lon, lat in heatmap.cell_polygon(cell)]
        features.append(_feature({"type": "Polygon", "coordinates": [ring]},
                                 kind="heatmap_cell", user=user, count=count))
    return features


def neighborhood_features(report: NeighborhoodReport) -> List[Dict[str, Any]]:
    """Home point, neighbourhood POI points and heatmap cells of one user."""
    features = [_stay_feature("home", report.user_id, report.home,
                              places=report.place_count, gps_places=report.gps_place_count)]
    for poi in report.neighborhood_pois:
        features.append(_stay_feature("neighborhood_poi", report.user_id, poi.stay,
                                      poi_id=poi.cluster.display_id,
                                      home_similarity=round(poi.home_similarity, 6)))
    features.extend(_heatmap_features(report.user_id, report.heatmap))
    return features


def path_features(trajectory: Trajectory, clusters: Sequence[PathCluster]) -> List[Dict[str, Any]]:
    """
    Representatives as points plus one simplified line per user.

    Each user's line joins the representatives of the clusters their scans
    fall in, in scan order, with consecutive repeats collapsed.
    """
    features = []
    for index, cluster in enumerate(clusters):
        rep = cluster.representative
        features.append(_feature(
            _point(rep.latitude, rep.longitude), kind="path_representative", cluster=index,
            user=",".join(cluster.owners), mode=cluster.mode.value, count=len(cluster),
            accuracy_m=round(rep.accuracy, 3),
        ))

    cluster_of = {i: k for k, cluster in enumerate(clusters) for i in cluster.member_indices}
    for user in sorted(set(trajectory.owners)):
        visited: List[int] = []
        for i, owner in enumerate(trajectory.owners):
            if owner == user and i in cluster_of and (not visited or visited[-1] != cluster_of[i]):
                visited.append(cluster_of[i])
        if len(visited) < 2:
            continue
        line = [[round(clusters[k].representative.longitude, COORD_DIGITS),
                 round(clusters[k].representative.latitude, COORD_DIGITS)] for k in visited]
        features.append(_feature({"type": "LineString", "coordinates": line},
                                 kind="path", user=user, count=len(visited)))
    return features
