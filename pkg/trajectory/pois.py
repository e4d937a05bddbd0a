"""Indoor POIs per GPS stay region for one user."""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from clustering.wifi_cluster import ClusterRun, PoiRegistry, extract_poi
from model.config import PipelineConfig
from model.types import GpsTrack, Interval, PoiCluster, ScanList, StayPoint, TimeWindow
from trajectory.gps_pipeline import GeoCluster, clean_track, cluster_stay_points, extract_stay_points
from utils.log import logger


@dataclass(frozen=True)
class RegionPois:
    """WiFi clustering of the scans taken inside one stay region."""
    region_id: int
    region: GeoCluster
    occupancy: Tuple[Interval, ...]
    run: ClusterRun

    @property
    def scans(self) -> ScanList:
        return self.run.input

    @property
    def clusters(self) -> Tuple[PoiCluster, ...]:
        return self.run.clusters


@dataclass(frozen=True)
class UserPois:
    user_id: str
    stays: Tuple[StayPoint, ...]
    regions: Tuple[RegionPois, ...]

    @property
    def poi_count(self) -> int:
        return sum(len(r.clusters) for r in self.regions)


def _renumber(run: ClusterRun, mapping: Dict[int, int]) -> ClusterRun:
    clusters = tuple(sorted((replace(c, poi_id=mapping[c.poi_id]) for c in run.clusters),
                            key=lambda c: c.poi_id))
    return replace(run, clusters=clusters)


def extract_user_pois(track: GpsTrack, scans: ScanList, cfg: PipelineConfig,
                      window: Optional[TimeWindow] = None,
                      registry: Optional[PoiRegistry] = None) -> UserPois:
    """
    Find the indoor POIs of one user.

    The track is cleaned, reduced to stay points and grouped into stay
    regions; the scans falling inside each region's stays are then clustered
    on their own, so POI ids are scoped to a region.

    Args:
        track (GpsTrack): Raw fixes
        scans (ScanList): Scans of the same user
        cfg (PipelineConfig): Pipeline configuration
        window (Optional[TimeWindow]): Only consider samples inside this window
        registry (Optional[PoiRegistry]): Known POIs; ids are reconciled against it when given

    Returns:
        UserPois: Stay points and per-region clustering runs
    """
    window = window or TimeWindow.everything()
    track = track.within(window)
    scans = scans.select([i for i, s in enumerate(scans) if window.contains(s.timestamp)])

    stays = extract_stay_points(clean_track(track, cfg), cfg)
    regions = []
    for region in cluster_stay_points(stays, cfg):
        occupancy = tuple(sorted(region.intervals))
        run = extract_poi(scans.select(scans.indices_within(occupancy)), cfg)
        region_id = region.cluster_id
        if registry is not None:
            known = registry.region_for(scans.user_id, *region.centroid, cfg.stay_radius_m)
            run = _renumber(run, registry.reconcile(known, run, cfg))
            region_id = known.region_key
        regions.append(RegionPois(region_id, region, occupancy, run))

    logger.info("user pois extracted", {
        "user": scans.user_id, "stays": len(stays), "regions": len(regions),
        "pois": sum(len(r.clusters) for r in regions),
    })
    return UserPois(scans.user_id, tuple(stays), tuple(regions))
