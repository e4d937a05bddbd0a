# Validators

import math
import re
from typing import Any, Dict, Iterable, Mapping, Tuple, Union

from model.types import GpsPoint, RSS_FLOOR_DBM, ScanResult
from utils.exceptions import MalformedMac, MissingTimestamp, OutOfRangeRss, ValidationError

RawReadings = Union[Mapping[str, Any], Iterable[Tuple[str, Any]]]


class TraceValidator:
    """Validates and normalizes raw scan and GPS records."""

    MAC_SEPARATORS = re.compile(r'[:\-.]')
    HEX12 = re.compile(r'^[0-9a-f]{12}$')

    @staticmethod
    def normalize_mac(mac: Any) -> str:
        """
        Normalize a MAC address to 12 lowercase hex digits.

        Args:
            mac (Any): MAC as written by the scanner (``AA:BB:..``, ``aa-bb-..`` or bare)

        Returns:
            str: The normalized MAC

        Raises:
            MalformedMac: If the MAC is not 48 bits of hex
        """
        if not isinstance(mac, str):
            raise MalformedMac(f"MAC must be a string, got {type(mac).__name__}")
        bare = TraceValidator.MAC_SEPARATORS.sub('', mac.strip()).lower()
        if not TraceValidator.HEX12.match(bare):
            raise MalformedMac(f"Invalid MAC address: {mac!r}")
        return bare

    @staticmethod
    def validate_rss(rss: Any) -> int:
        """
        Validate an RSS reading.

        Raises:
            OutOfRangeRss: If the reading is not a whole dBm value in [-120, 0)
        """
        if isinstance(rss, bool) or not isinstance(rss, (int, float)) or not math.isfinite(rss):
            raise OutOfRangeRss(f"RSS must be a number, got {rss!r}")
        if rss != int(rss):
            raise OutOfRangeRss(f"RSS must be a whole dBm value, got {rss}")
        if rss >= 0 or rss < RSS_FLOOR_DBM:
            raise OutOfRangeRss(f"RSS {rss} dBm outside [{RSS_FLOOR_DBM}, 0)")
        return int(rss)

    @staticmethod
    def validate_timestamp(timestamp: Any) -> int:
        """
        Validate a UTC epoch-seconds timestamp.

        Raises:
            MissingTimestamp: If the timestamp is absent or not a number
        """
        if timestamp is None or isinstance(timestamp, bool):
            raise MissingTimestamp("Timestamp is required")
        if not isinstance(timestamp, (int, float)) or not math.isfinite(timestamp):
            raise MissingTimestamp(f"Timestamp must be epoch seconds, got {timestamp!r}")
        if timestamp < 0:
            raise MissingTimestamp(f"Timestamp must not be negative, got {timestamp}")
        return int(timestamp)

    @staticmethod
    def validate_scan(readings: RawReadings, timestamp: Any) -> ScanResult:
        """
        Build a normalized ScanResult from a raw scan record.

        MACs are lowercased with separators removed; a MAC heard twice keeps
        its strongest reading.

        Args:
            readings (RawReadings): MAC -> RSS mapping or (MAC, RSS) pairs
            timestamp (Any): Scan time in epoch seconds

        Returns:
            ScanResult: The validated scan

        Raises:
            MalformedMac, OutOfRangeRss, MissingTimestamp: On invalid input
        """
        t = TraceValidator.validate_timestamp(timestamp)
        pairs = readings.items() if isinstance(readings, Mapping) else readings
        strongest: Dict[str, int] = {}
        try:
            for mac, rss in pairs:
                mac = TraceValidator.normalize_mac(mac)
                rss = TraceValidator.validate_rss(rss)
                if mac not in strongest or rss > strongest[mac]:
                    strongest[mac] = rss
        except (TypeError, ValueError) as e:
            raise ValidationError(f"Scan readings must be (mac, rss) pairs: {e}") from e
        return ScanResult.from_readings(strongest, t)

    @staticmethod
    def validate_fix(latitude: Any, longitude: Any, accuracy: Any, timestamp: Any) -> GpsPoint:
        """
        Build a GpsPoint from a raw fix record.

        Raises:
            ValidationError: If coordinates or accuracy are out of range
            MissingTimestamp: If the timestamp is absent
        """
        t = TraceValidator.validate_timestamp(timestamp)
        for name, value in (("lat", latitude), ("lon", longitude), ("acc", accuracy)):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a number, got {value!r}")
        return GpsPoint(float(latitude), float(longitude), float(accuracy), t)
