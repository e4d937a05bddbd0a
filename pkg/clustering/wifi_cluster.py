"""Indoor POI extraction: density clustering of WiFi scans.

The clustering walks the scan list in order. A scan whose neighbourhood
(including itself) holds at least ``minPts`` scans seeds a cluster; the
neighbourhoods of core scans reached while expanding are merged into the seed
list. Border scans go to the first cluster that reaches them, which makes runs
reproducible for a fixed input order.
"""

import hashlib
import json
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from clustering.similarity import AdaptiveThreshold, ThresholdPolicy, compute_threshold, cosine_similarity
from model.config import PipelineConfig
from model.types import Fingerprint, Interval, PoiCluster, ScanList, ScanResult
from utils.exceptions import EmptyCluster, StoreError
from utils.geo import haversine_m
from utils.log import logger


class EvaluationCounter:
    """Counts similarity evaluations made by neighbour queries."""

    def __init__(self):
        self.count = 0

    def tick(self, n: int = 1) -> None:
        self.count += n


@dataclass(frozen=True)
class ClusterRun:
    """Result of one clustering pass over a scan list."""
    input: ScanList
    clusters: Tuple[PoiCluster, ...]
    noise: Tuple[int, ...]
    similarity_evaluations: int = 0

    def labels(self) -> List[int]:
        """Cluster index per scan, -1 for noise."""
        labels = [-1] * len(self.input)
        for cluster in self.clusters:
            for i in cluster.member_indices:
                labels[i] = cluster.poi_id
        return labels


def neighbors_of(anchor: ScanResult, scans: ScanList, cfg: PipelineConfig,
                 policy: Optional[ThresholdPolicy] = None,
                 counter: Optional[EvaluationCounter] = None) -> List[int]:
    """
    Indices of every scan similar enough to ``anchor``.

    Args:
        anchor (ScanResult): The scan whose neighbourhood is wanted; a member of ``scans``
        scans (ScanList): All scans
        cfg (PipelineConfig): Pipeline configuration
        policy (Optional[ThresholdPolicy]): Neighbour rule; the adaptive rule by default
        counter (Optional[EvaluationCounter]): Receives the number of similarity evaluations

    Returns:
        List[int]: Sorted indices, the anchor's own index included
    """
    policy = policy or AdaptiveThreshold(cfg)
    anchor_fp = anchor.fingerprint
    found = []
    for i, other in enumerate(scans):
        if other is anchor or policy.are_neighbours(anchor_fp, other.fingerprint):
            found.append(i)
    if counter is not None:
        counter.tick(len(scans))
    return found


def density_clusters(n: int, region_query: Callable[[int], Sequence[int]],
                     min_pts: int) -> Tuple[List[List[int]], List[int]]:
    """
    DBSCAN over ``n`` points given a neighbourhood query.

    Every point is visited once, so ``region_query`` runs at most ``n`` times.

    Args:
        n (int): Number of points
        region_query (Callable[[int], Sequence[int]]): Neighbours of a point, itself included
        min_pts (int): Minimum neighbourhood size of a core point

    Returns:
        Tuple[List[List[int]], List[int]]: Clusters in discovery order (members sorted) and noise
    """
    assigned: List[Optional[int]] = [None] * n
    visited = [False] * n
    clusters: List[List[int]] = []

    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        seeds = list(region_query(i))
        if len(seeds) < min_pts:
            continue

        cluster_id = len(clusters)
        members = []
        queued = set(seeds)
        k = 0
        while k < len(seeds):
            j = seeds[k]
            k += 1
            if assigned[j] is None:
                assigned[j] = cluster_id
                members.append(j)
            if not visited[j]:
                visited[j] = True
                grown = region_query(j)
                if len(grown) >= min_pts:
                    for q in grown:
                        if q not in queued:
                            queued.add(q)
                            seeds.append(q)
        clusters.append(sorted(members))

    noise = [i for i in range(n) if assigned[i] is None]
    return clusters, noise


def split_visits(timestamps: Sequence[int], max_gap_s: float, pad_s: int = 0) -> Tuple[Interval, ...]:
    """
    Group sorted member timestamps into visits, splitting on gaps above ``max_gap_s``.

    A visit made of a single scan is widened by ``pad_s`` on each side so it
    keeps a positive length.
    """
    visits = []
    start = prev = None
    for t in timestamps:
        if start is None:
            start = prev = t
        elif t - prev > max_gap_s:
            visits.append((start, prev))
            start = prev = t
        else:
            prev = t
    if start is not None:
        visits.append((start, prev))
    return tuple((lo - pad_s, hi + pad_s) if lo == hi else (lo, hi) for lo, hi in visits)


def fingerprint_of(indices: Sequence[int], scans: ScanList) -> Fingerprint:
    """
    Mean RSS per MAC over the scans where that MAC was heard.

    Raises:
        EmptyCluster: If ``indices`` is empty
    """
    if not indices:
        raise EmptyCluster("cannot build a fingerprint from an empty cluster")
    sums: Dict[str, float] = defaultdict(float)
    counts: Dict[str, int] = defaultdict(int)
    for i in indices:
        for obs in scans[i].observations:
            sums[obs.mac] += obs.rss
            counts[obs.mac] += 1
    return Fingerprint({mac: sums[mac] / counts[mac] for mac in sorted(sums)})


def build_fingerprint(cluster: PoiCluster, scans: ScanList) -> Fingerprint:
    """
    Fingerprint of a POI cluster.

    Args:
        cluster (PoiCluster): The cluster
        scans (ScanList): The scan list its member indices refer to

    Returns:
        Fingerprint: Mean RSS per MAC

    Raises:
        EmptyCluster: If the cluster has no members
    """
    return fingerprint_of(cluster.member_indices, scans)


def extract_poi(scans: ScanList, cfg: PipelineConfig,
                policy: Optional[ThresholdPolicy] = None,
                min_pts: Optional[int] = None) -> ClusterRun:
    """
    Cluster a scan list into indoor POIs.

    Args:
        scans (ScanList): Scans of one user inside one GPS stay region
        cfg (PipelineConfig): Pipeline configuration
        policy (Optional[ThresholdPolicy]): Neighbour rule; adaptive by default
        min_pts (Optional[int]): Overrides ``cfg.min_pts_poi``

    Returns:
        ClusterRun: Clusters with POI ids in discovery order, plus noise
    """
    policy = policy or AdaptiveThreshold(cfg)
    min_pts = cfg.min_pts_poi if min_pts is None else min_pts
    counter = EvaluationCounter()

    def region_query(i: int) -> List[int]:
        return neighbors_of(scans[i], scans, cfg, policy, counter)

    member_lists, noise = density_clusters(len(scans), region_query, min_pts)
    clusters = tuple(
        PoiCluster(
            poi_id=poi_id,
            member_indices=tuple(members),
            fingerprint=fingerprint_of(members, scans),
            visits=split_visits([scans[i].timestamp for i in members], cfg.visit_gap_s, cfg.scan_interval_s // 2),
        )
        for poi_id, members in enumerate(member_lists)
    )
    logger.debug("wifi clustering finished", {
        "user": scans.user_id, "scans": len(scans), "clusters": len(clusters),
        "noise": len(noise), "evaluations": counter.count,
    })
    return ClusterRun(scans, clusters, tuple(noise), counter.count)


def match_revisit(candidate: Fingerprint, known: Sequence[Tuple[int, Fingerprint]],
                  cfg: PipelineConfig) -> Optional[int]:
    """
    Find the known POI a fingerprint revisits.

    Args:
        candidate (Fingerprint): Fingerprint of a freshly found cluster
        known (Sequence[Tuple[int, Fingerprint]]): (poi_id, fingerprint) of known POIs
        cfg (PipelineConfig): Pipeline configuration

    Returns:
        Optional[int]: The most similar known poi_id above its adaptive threshold
        (lowest id on ties), or None for a new place
    """
    if candidate.p == 0:
        return None
    best_id, best_sim = None, -1.0
    for poi_id, fp in sorted(known, key=lambda item: item[0]):
        if fp.p == 0:
            continue
        sim = cosine_similarity(candidate, fp)
        if sim >= compute_threshold(candidate, fp, cfg) and sim > best_sim:
            best_id, best_sim = poi_id, sim
    return best_id


@dataclass
class RegistryRegion:
    region_key: int
    latitude: float
    longitude: float
    pois: List[Tuple[int, Fingerprint]] = field(default_factory=list)

    def next_id(self) -> int:
        return max((poi_id for poi_id, _ in self.pois), default=-1) + 1


class PoiRegistry:
    """Fingerprints of POIs already identified, per user and stay region.

    Lets independent runs over different windows agree on POI ids.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = Path(path) if path else None
        self._regions: Dict[str, List[RegistryRegion]] = {}
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        try:
            data = json.loads(self.path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise StoreError(f"Failed to load POI registry {self.path}: {e}") from e
        for user, regions in data.get("users", {}).items():
            self._regions[user] = [
                RegistryRegion(
                    region_key=r["region_key"], latitude=r["lat"], longitude=r["lon"],
                    pois=[(p["poi_id"], Fingerprint(p["fingerprint"])) for p in r["pois"]],
                )
                for r in regions
            ]

    def _dumps(self) -> str:
        data = {"users": {
            user: [
                {"region_key": r.region_key, "lat": r.latitude, "lon": r.longitude,
                 "pois": [{"poi_id": pid, "fingerprint": dict(fp.entries)} for pid, fp in r.pois]}
                for r in regions
            ]
            for user, regions in sorted(self._regions.items())
        }}
        return json.dumps(data, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self._dumps().encode("utf-8")).hexdigest()

    def save(self) -> None:
        """Write the registry atomically."""
        if not self.path:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=".registry-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(self._dumps())
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def region_for(self, user_id: str, latitude: float, longitude: float,
                   radius_m: float) -> RegistryRegion:
        """Known region within ``radius_m`` of a centroid, created when missing."""
        regions = self._regions.setdefault(user_id, [])
        nearby = [(haversine_m(latitude, longitude, r.latitude, r.longitude), r.region_key, r)
                  for r in regions]
        nearby = [item for item in nearby if item[0] <= radius_m]
        if nearby:
            return min(nearby, key=lambda item: item[:2])[2]
        region = RegistryRegion(len(regions), latitude, longitude)
        regions.append(region)
        return region

    def reconcile(self, region: RegistryRegion, run: ClusterRun,
                  cfg: PipelineConfig) -> Dict[int, int]:
        """
        Map the clusters of a run onto persistent POI ids of a region.

        Each known POI is claimed at most once per run; unmatched clusters
        are registered under fresh ids.

        Returns:
            Dict[int, int]: run poi_id -> persistent poi_id
        """
        mapping: Dict[int, int] = {}
        unclaimed = list(region.pois)
        for cluster in run.clusters:
            match = match_revisit(cluster.fingerprint, unclaimed, cfg)
            if match is None:
                match = region.next_id()
                region.pois.append((match, cluster.fingerprint))
            else:
                unclaimed = [item for item in unclaimed if item[0] != match]
            mapping[cluster.poi_id] = match
        return mapping
