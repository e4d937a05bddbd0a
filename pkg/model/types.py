"""Domain types shared by every pipeline stage.

Symbol map for readers coming from the clustering literature:

* ``ApObservation.mac`` / ``.rss``  -- one (MAC, RSS) pair of a scan
* ``ScanResult``                    -- one scan ``s`` with ``n`` observations
* ``ScanList``                      -- the scan list ``S``; ``len(S)`` is the
  scan count (also written ``m`` in some texts, which reuses the MAC symbol)
* ``Fingerprint.entries``           -- ``F = {(M, R)}``; ``p`` is its size
  (``u``/``v`` when two fingerprints are compared)
* ``GpsPoint.accuracy``             -- GPS accuracy ``a`` in meters
"""

import math
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from utils.exceptions import MalformedMac, OutOfRangeRss, ValidationError

MAC_PATTERN = re.compile(r'^[0-9a-f]{12}$')
RSS_FLOOR_DBM = -120

Interval = Tuple[int, int]


class StaySource(str, Enum):
    """Which sensor produced a stay point."""
    GPS = "gps"
    WIFI = "wifi"
    FUSED = "fused"


@dataclass(frozen=True)
class TimeWindow:
    """Half-open UTC interval ``[start, end)`` in epoch seconds."""
    start: int
    end: int

    def __post_init__(self):
        if self.end <= self.start:
            raise ValidationError(f"empty time window [{self.start}, {self.end})")

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end

    def clip(self, interval: Interval) -> Optional[Interval]:
        lo, hi = max(interval[0], self.start), min(interval[1], self.end)
        return (lo, hi) if lo <= hi else None

    @classmethod
    def everything(cls) -> "TimeWindow":
        return cls(0, 2 ** 62)


@dataclass(frozen=True)
class ApObservation:
    """One access point heard in a scan: MAC (12 lowercase hex digits) and RSS in dBm."""
    mac: str
    rss: int

    def __post_init__(self):
        if not isinstance(self.mac, str) or not MAC_PATTERN.match(self.mac):
            raise MalformedMac(f"invalid MAC address: {self.mac!r}")
        if isinstance(self.rss, bool) or not isinstance(self.rss, int):
            raise OutOfRangeRss(f"RSS must be an integer dBm value, got {self.rss!r}")
        if not RSS_FLOOR_DBM <= self.rss < 0:
            raise OutOfRangeRss(f"RSS {self.rss} dBm outside [{RSS_FLOOR_DBM}, 0)")


@dataclass(frozen=True)
class Fingerprint:
    """Mean RSS per MAC characterising a place (or a single scan)."""
    entries: Mapping[str, float]

    def __post_init__(self):
        entries = {mac: float(rss) for mac, rss in dict(self.entries).items()}
        for mac, rss in entries.items():
            if rss >= 0:
                raise OutOfRangeRss(f"fingerprint RSS for {mac} must be negative, got {rss}")
        object.__setattr__(self, "entries", MappingProxyType(entries))

    def __hash__(self) -> int:
        return hash(frozenset(self.entries.items()))

    def __reduce__(self):
        # mappingproxy is not picklable
        return (Fingerprint, (dict(self.entries),))

    @property
    def p(self) -> int:
        """Number of distinct MAC addresses."""
        return len(self.entries)

    @cached_property
    def self_dot(self) -> float:
        """Sum of squared RSS over every MAC (``d`` of the cosine formula)."""
        return math.fsum(r * r for r in self.entries.values())

    @cached_property
    def norm(self) -> float:
        return math.sqrt(self.self_dot)


@dataclass(frozen=True)
class ScanResult:
    """One WiFi scan. Observations are kept sorted by MAC."""
    observations: Tuple[ApObservation, ...]
    timestamp: int

    def __post_init__(self):
        observations = tuple(sorted(self.observations, key=lambda o: o.mac))
        macs = [o.mac for o in observations]
        if len(set(macs)) != len(macs):
            raise ValidationError("duplicate MAC address within one scan")
        object.__setattr__(self, "observations", observations)

    @classmethod
    def from_readings(cls, readings: Mapping[str, int], timestamp: int) -> "ScanResult":
        return cls(tuple(ApObservation(mac, rss) for mac, rss in readings.items()), timestamp)

    @property
    def n(self) -> int:
        return len(self.observations)

    @cached_property
    def fingerprint(self) -> Fingerprint:
        return Fingerprint({o.mac: o.rss for o in self.observations})

    def as_dict(self) -> Dict[str, int]:
        return {o.mac: o.rss for o in self.observations}


@dataclass(frozen=True)
class ScanList:
    """Time-ordered scans of one user."""
    user_id: str
    scans: Tuple[ScanResult, ...] = ()

    def __post_init__(self):
        scans = tuple(self.scans)
        for prev, cur in zip(scans, scans[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValidationError("scan timestamps must be non-decreasing")
        object.__setattr__(self, "scans", scans)

    def __len__(self) -> int:
        return len(self.scans)

    def __getitem__(self, index: int) -> ScanResult:
        return self.scans[index]

    def __iter__(self) -> Iterator[ScanResult]:
        return iter(self.scans)

    @cached_property
    def timestamps(self) -> List[int]:
        return [s.timestamp for s in self.scans]

    def select(self, indices: Sequence[int]) -> "ScanList":
        return ScanList(self.user_id, tuple(self.scans[i] for i in sorted(indices)))

    def indices_within(self, intervals: Sequence[Interval]) -> List[int]:
        """Indices of scans whose timestamp falls inside any closed interval."""
        ts = self.timestamps
        chosen = set()
        for lo, hi in intervals:
            chosen.update(range(bisect_left(ts, lo), bisect_right(ts, hi)))
        return sorted(chosen)


@dataclass(frozen=True)
class GpsPoint:
    """A raw GPS fix; ``accuracy`` is the reported radius in meters."""
    latitude: float
    longitude: float
    accuracy: float
    timestamp: int

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(f"longitude out of range: {self.longitude}")
        if not self.accuracy > 0:
            raise ValidationError(f"accuracy must be positive: {self.accuracy}")


@dataclass(frozen=True)
class GpsTrack:
    """Time-ordered GPS fixes of one user."""
    user_id: str
    points: Tuple[GpsPoint, ...] = ()

    def __post_init__(self):
        points = tuple(self.points)
        for prev, cur in zip(points, points[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValidationError("GPS timestamps must be non-decreasing")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[GpsPoint]:
        return iter(self.points)

    def __getitem__(self, index: int) -> GpsPoint:
        return self.points[index]

    @cached_property
    def timestamps(self) -> List[int]:
        return [p.timestamp for p in self.points]

    def nearest(self, t: float, tolerance_s: Optional[float] = None,
                max_accuracy: Optional[float] = None) -> Optional[GpsPoint]:
        """
        Fix closest in time to ``t``.

        Args:
            t (float): Query time
            tolerance_s (Optional[float]): Largest accepted time skew
            max_accuracy (Optional[float]): Only consider fixes at least this accurate

        Returns:
            Optional[GpsPoint]: The fix, or None when nothing qualifies
        """
        ts = self.timestamps
        if max_accuracy is None:
            pos = bisect_left(ts, t)
            candidates = [self.points[i] for i in (pos - 1, pos) if 0 <= i < len(ts)]
        else:
            lo = 0 if tolerance_s is None else bisect_left(ts, t - tolerance_s)
            hi = len(ts) if tolerance_s is None else bisect_right(ts, t + tolerance_s)
            candidates = [p for p in self.points[lo:hi] if p.accuracy <= max_accuracy]
        if not candidates:
            return None
        best = min(candidates, key=lambda p: (abs(p.timestamp - t), p.timestamp))
        if tolerance_s is not None and abs(best.timestamp - t) > tolerance_s:
            return None
        return best

    def within(self, window: TimeWindow) -> "GpsTrack":
        return GpsTrack(self.user_id, tuple(p for p in self.points if window.contains(p.timestamp)))


@dataclass(frozen=True)
class StayPoint:
    """A dwell. WiFi-only places carry no coordinates."""
    latitude: Optional[float]
    longitude: Optional[float]
    arrive: int
    depart: int
    source: StaySource = StaySource.GPS
    label: Optional[str] = None

    def __post_init__(self):
        if self.depart <= self.arrive:
            raise ValidationError(f"stay point must depart after it arrives ({self.arrive} -> {self.depart})")

    @property
    def dwell(self) -> int:
        return self.depart - self.arrive

    @property
    def has_position(self) -> bool:
        return self.latitude is not None and self.longitude is not None

    @property
    def interval(self) -> Interval:
        return (self.arrive, self.depart)


@dataclass(frozen=True)
class PoiCluster:
    """An indoor POI found by WiFi clustering inside one GPS stay region."""
    poi_id: int
    member_indices: Tuple[int, ...]
    fingerprint: Fingerprint
    visits: Tuple[Interval, ...] = field(default_factory=tuple)

    @property
    def display_id(self) -> str:
        return f"{self.poi_id + 1:02d}"

    @property
    def dwell_s(self) -> int:
        return sum(depart - arrive for arrive, depart in self.visits)

    def __len__(self) -> int:
        return len(self.member_indices)
