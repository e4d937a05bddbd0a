"""Domain types and pipeline configuration."""
from model.config import PipelineConfig, build_config
from model.types import (
    ApObservation, Fingerprint, GpsPoint, GpsTrack, Interval, PoiCluster,
    ScanList, ScanResult, StayPoint, StaySource, TimeWindow,
)

__all__ = [
    'ApObservation', 'Fingerprint', 'GpsPoint', 'GpsTrack', 'Interval',
    'PoiCluster', 'PipelineConfig', 'ScanList', 'ScanResult', 'StayPoint',
    'StaySource', 'TimeWindow', 'build_config',
]
