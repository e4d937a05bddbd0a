"""GPS stay points, GPS/WiFi fusion and micro-mobility paths."""
from trajectory.fusion import (
    Heatmap, NeighborhoodReport, build_heatmap, extract_neighborhood, identify_home,
)
from trajectory.gps_pipeline import GeoCluster, clean_track, cluster_stay_points, extract_stay_points
from trajectory.micromobility import (
    PathCluster, RepresentativeMode, SweepRow, Trajectory, cluster_path, cluster_paths,
    extract_travel_windows, sweep_paths, sweep_threshold,
)
from trajectory.pois import RegionPois, UserPois, extract_user_pois

__all__ = [
    'GeoCluster', 'Heatmap', 'NeighborhoodReport', 'PathCluster', 'RegionPois',
    'RepresentativeMode', 'SweepRow', 'Trajectory', 'UserPois', 'build_heatmap',
    'clean_track', 'cluster_path', 'cluster_paths', 'cluster_stay_points',
    'extract_neighborhood', 'extract_stay_points', 'extract_travel_windows',
    'extract_user_pois', 'identify_home', 'sweep_paths', 'sweep_threshold',
]
