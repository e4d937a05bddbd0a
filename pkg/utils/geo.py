# Geo

from math import asin, cos, radians, sin, sqrt
from typing import Iterable, Tuple

import numpy as np

EARTH_RADIUS_M = 6371000.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """
    Great-circle distance between two WGS84 points on a sphere.

    Args:
        lat1 (float): Latitude of the first point in degrees
        lon1 (float): Longitude of the first point in degrees
        lat2 (float): Latitude of the second point in degrees
        lon2 (float): Longitude of the second point in degrees

    Returns:
        float: Distance in meters
    """
    phi1, lam1, phi2, lam2 = map(radians, (lat1, lon1, lat2, lon2))
    a = sin((phi2 - phi1) / 2) ** 2 + cos(phi1) * cos(phi2) * sin((lam2 - lam1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * asin(min(1.0, sqrt(a)))


def mean_position(points: Iterable[Tuple[float, float]]) -> Tuple[float, float]:
    """Arithmetic mean of (lat, lon) pairs; fine at neighbourhood scale."""
    arr = np.asarray(list(points), dtype=float)
    if arr.size == 0:
        raise ValueError("mean_position needs at least one point")
    lat, lon = arr.mean(axis=0)
    return float(lat), float(lon)


def offset_position(lat: float, lon: float, north_m: float, east_m: float) -> Tuple[float, float]:
    """Move a point by a local north/east offset in meters (equirectangular)."""
    dlat = np.degrees(north_m / EARTH_RADIUS_M)
    dlon = np.degrees(east_m / (EARTH_RADIUS_M * cos(radians(lat))))
    return float(lat + dlat), float(lon + dlon)


def equirectangular_xy(lat: float, lon: float, ref_lat: float) -> Tuple[float, float]:
    """Project to planar meters (x east, y north) scaled at ``ref_lat``."""
    x = EARTH_RADIUS_M * radians(lon) * cos(radians(ref_lat))
    y = EARTH_RADIUS_M * radians(lat)
    return x, y


def equirectangular_inverse(x: float, y: float, ref_lat: float) -> Tuple[float, float]:
    """Inverse of :func:`equirectangular_xy`; returns (lat, lon)."""
    lat = np.degrees(y / EARTH_RADIUS_M)
    lon = np.degrees(x / (EARTH_RADIUS_M * cos(radians(ref_lat))))
    return float(lat), float(lon)
