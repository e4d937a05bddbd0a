"""Trace simulation: scans and GPS fixes with ground-truth labels."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from ingest.codec import EXTENSION, encode_batch, split_into_batches
from ingest.store import atomic_write
from model.config import PipelineConfig
from model.types import GpsPoint, GpsTrack, ScanList, ScanResult
from synth.world import Position, Scenario, Visit, Walkway, World, check_references
from utils.geo import haversine_m, offset_position
from utils.log import logger

TRANSIT_PREFIX = "transit:"
TRUTH_FILE = "truth.csv"


@dataclass(frozen=True)
class TruthLabel:
    user_id: str
    timestamp: int
    label: str

    @property
    def in_transit(self) -> bool:
        return self.label.startswith(TRANSIT_PREFIX)


@dataclass(frozen=True)
class SimulatedTrace:
    user_id: str
    track: GpsTrack
    scans: ScanList
    truth: Tuple[TruthLabel, ...] = field(default_factory=tuple)

    def labels(self) -> List[str]:
        """Ground-truth label per scan, aligned with ``scans``."""
        return [t.label for t in self.truth]

    def indices_of(self, label: str) -> List[int]:
        return [i for i, t in enumerate(self.truth) if t.label == label]


def truth_frame(traces: Dict[str, SimulatedTrace]) -> pd.DataFrame:
    """Ground truth of every scan as a table (``user, t, label, in_transit``)."""
    rows = [
        {"user": t.user_id, "t": t.timestamp, "label": t.label, "in_transit": t.in_transit}
        for user in sorted(traces) for t in traces[user].truth
    ]
    return pd.DataFrame(rows, columns=["user", "t", "label", "in_transit"])


def _along(walkway: Walkway, fraction: float, reverse: bool) -> Position:
    points = walkway.points[::-1] if reverse else walkway.points
    legs = list(range(len(walkway.points) - 1))
    if reverse:
        legs = legs[::-1]
    lengths = [haversine_m(*points[i], *points[i + 1]) for i in range(len(points) - 1)]
    target = fraction * sum(lengths)
    for k, length in enumerate(lengths):
        if target <= length or k == len(lengths) - 1:
            f = 0.0 if length == 0 else min(1.0, target / length)
            (lat1, lon1), (lat2, lon2) = points[k], points[k + 1]
            leg = walkway.leg(legs[k])
            return Position(lat=lat1 + f * (lat2 - lat1), lon=lon1 + f * (lon2 - lon1),
                            floor=walkway.floor, zone=leg.zone, sheltered=leg.sheltered)
        target -= length
    raise AssertionError("unreachable")


def _grid(start: int, end: int, interval: int) -> range:
    return range(math.ceil(start / interval) * interval, end, interval)


def _scan(world: World, at: Position, t: int, sigma: float, rng: np.random.Generator) -> ScanResult:
    rss = world.mean_rss(at)
    if sigma > 0:
        rss = rss + rng.normal(0.0, sigma, size=rss.shape)
    readings = {}
    for ap, value in zip(world.aps, np.rint(rss)):
        if value >= world.detection_floor_dbm:
            readings[ap.mac] = int(min(value, -1))
    return ScanResult.from_readings(readings, t)


def _fix(at: Position, t: int, scenario: Scenario, rng: np.random.Generator) -> GpsPoint:
    noise = scenario.noise
    lo, hi = noise.sheltered_accuracy_m if at.sheltered else noise.open_accuracy_m
    scatter = noise.sheltered_scatter_m if at.sheltered else noise.open_scatter_m
    north, east = rng.normal(0.0, scatter, size=2) if scatter > 0 else (0.0, 0.0)
    lat, lon = offset_position(at.lat, at.lon, float(north), float(east))
    accuracy = round(float(rng.uniform(lo, hi)), 1)
    return GpsPoint(round(lat, 7), round(lon, 7), max(accuracy, 0.1), t + noise.gps_offset_s)


def simulate(world: World, scenario: Scenario, cfg: PipelineConfig, seed: int) -> Dict[str, SimulatedTrace]:
    """
    Generate WiFi scans and GPS fixes for every agent of a scenario.

    Samples are taken on a grid of ``scenario.scan_interval_s`` seconds while a
    schedule step is active; a fix follows each scan by ``gps_offset_s``.
    RSS follows the world's log-distance model plus Gaussian jitter; readings
    below the detection floor are not reported.

    Args:
        world (World): Access points, places and walkways
        scenario (Scenario): Agent schedules and noise model
        cfg (PipelineConfig): Pipeline configuration
        seed (int): Random seed; equal seeds give identical traces

    Returns:
        Dict[str, SimulatedTrace]: Trace and ground truth per user
    """
    check_references(world, scenario)
    if scenario.scan_interval_s != cfg.scan_interval_s:
        logger.warning("scenario sampling differs from pipeline config", {
            "scenario_interval_s": scenario.scan_interval_s, "config_interval_s": cfg.scan_interval_s,
        })
    sigma = scenario.noise.rss_sigma_db
    traces = {}
    for index, agent in enumerate(scenario.agents):
        rng = np.random.default_rng([seed, index])
        scans, fixes, truth = [], [], []
        for step in agent.schedule:
            for t in _grid(step.start, step.end, scenario.scan_interval_s):
                if isinstance(step, Visit):
                    at = world.place(step.place).position()
                    label = step.place
                else:
                    fraction = (t - step.start) / (step.end - step.start)
                    at = _along(world.walkway(step.walkway), fraction, step.reverse)
                    label = f"{TRANSIT_PREFIX}{step.walkway}"
                scans.append(_scan(world, at, t, sigma, rng))
                fixes.append(_fix(at, t, scenario, rng))
                truth.append(TruthLabel(agent.user, t, label))
        traces[agent.user] = SimulatedTrace(
            agent.user,
            GpsTrack(agent.user, tuple(fixes)),
            ScanList(agent.user, tuple(scans)),
            tuple(truth),
        )
        logger.debug("agent simulated", {"user": agent.user, "samples": len(scans)})
    return traces


def transit_part(trace: SimulatedTrace) -> Tuple[ScanList, GpsTrack]:
    """Scans taken in transit and the whole track, per ground truth."""
    indices = [i for i, t in enumerate(trace.truth) if t.in_transit]
    return trace.scans.select(indices), trace.track


def write_dataset(traces: Dict[str, SimulatedTrace], out_dir: str,
                  batch_hours: float = 6.0) -> List[Path]:
    """
    Write simulated traces as batch files plus a ``truth.csv`` sidecar.

    Batches are named ``<user>-<start>.mtrace.gz``.

    Returns:
        List[Path]: Batch files in user, then time order
    """
    out = Path(out_dir)
    written = []
    for user in sorted(traces):
        trace = traces[user]
        for batch in split_into_batches(trace.scans, trace.track, batch_hours):
            path = out / f"{user}-{batch.start}{EXTENSION}"
            atomic_write(path, encode_batch(batch))
            written.append(path)
    atomic_write(out / TRUTH_FILE, truth_frame(traces).to_csv(index=False).encode("utf-8"))
    logger.info("dataset written", {"dir": str(out), "users": len(traces), "batches": len(written)})
    return written


__all__ = ["SimulatedTrace", "TruthLabel", "simulate", "transit_part", "truth_frame", "write_dataset"]
