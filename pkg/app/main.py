"""Command-line entry points."""

import argparse
import hashlib
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from joblib import Parallel, delayed

from app.config import Config
from app.export import (
    community_table, neighborhood_features, path_features, poi_features, poi_table, sweep_table,
)
from app.manifest import RunManifest, write_csv, write_geojson
from clustering.community import PoiNode, detect_communities, sweep_partition_threshold
from clustering.wifi_cluster import PoiRegistry
from ingest.codec import compression_table, read_batches
from ingest.store import TraceStore, ingest_file
from model.config import PipelineConfig
from model.types import GpsTrack, ScanList, TimeWindow
from synth.presets import PRESETS, get_preset
from synth.simulator import simulate, write_dataset
from synth.world import Scenario, World
from trajectory.fusion import extract_neighborhood, identify_home
from trajectory.gps_pipeline import clean_track, cluster_stay_points, extract_stay_points
from trajectory.micromobility import Trajectory, cluster_paths, extract_travel_windows, sweep_paths
from trajectory.pois import UserPois, extract_user_pois
from utils.exceptions import ConfigurationError, MTraceError, UnknownUser, ValidationError
from utils.geo import haversine_m
from utils.log import logger

DEFAULT_SWEEP = (0.2, 0.25, 0.3, 0.4)


# Arguments

def _epoch(value: Optional[str], default: int) -> int:
    if value is None:
        return default
    if value.lstrip("-").isdigit():
        return int(value)
    try:
        stamp = pd.Timestamp(value)
    except ValueError as e:
        raise ValidationError(f"cannot parse time {value!r}: {e}") from e
    if stamp.tzinfo is None:
        stamp = stamp.tz_localize("UTC")
    return int(stamp.timestamp())


def _window(args: argparse.Namespace) -> TimeWindow:
    everything = TimeWindow.everything()
    return TimeWindow(_epoch(args.start, everything.start), _epoch(args.end, everything.end))


def _pipeline_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline parameters")
    for name, info in PipelineConfig.model_fields.items():
        kind = info.annotation if info.annotation in (int, float) else str
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None,
                           help=f"{info.description or name} (default {info.default})")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; MTRACE_* environment variables otherwise")
    common.add_argument("--log-level", default=None)
    common.add_argument("--log-file", default=None)
    _pipeline_flags(common)
    return common


def _store_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--store", help="trace store directory")
    parser.add_argument("--user", action="append", dest="users",
                        help="user id (repeatable); every user in the store by default")
    parser.add_argument("--start", help="window start: epoch seconds or ISO time (UTC)")
    parser.add_argument("--end", help="window end (exclusive)")
    parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="mtrace", description="WiFi + GPS trajectory mining toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate batch files into a trace store")
    p.add_argument("paths", nargs="+")
    p.add_argument("--store", help="trace store directory")
    p.add_argument("--tolerate-rejects", action="store_true",
                   help="exit 0 even when some record lines were rejected")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("poi", parents=[common], help="indoor POIs per GPS stay region")
    _store_args(p)
    p.add_argument("--registry", help="POI registry file keeping ids stable across runs")
    p.set_defaults(func=cmd_poi)

    p = sub.add_parser("neighborhood", parents=[common], help="home, neighbourhood POIs and movement heatmap")
    _store_args(p)
    p.set_defaults(func=cmd_neighborhood)

    p = sub.add_parser("micro", parents=[common], help="simplified travel paths and threshold sweep")
    _store_args(p)
    p.add_argument("--eps", type=float, nargs="+", default=list(DEFAULT_SWEEP), help="sweep thresholds")
    p.set_defaults(func=cmd_micro)

    p = sub.add_parser("communities", parents=[common], help="popular places shared across users")
    _store_args(p)
    p.add_argument("--threshold", type=float, default=None,
                   help="partition threshold (louvain_partition_threshold by default)")
    p.add_argument("--lat", type=float, help="place region centre latitude")
    p.add_argument("--lon", type=float, help="place region centre longitude")
    p.add_argument("--radius-m", type=float, default=500.0, help="place region radius")
    p.add_argument("--sweep", type=float, nargs="+", help="also tabulate these partition thresholds")
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("synth", parents=[common], help="simulate a scenario into batch files")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--world", help="world JSON document (with --scenario, instead of --preset)")
    p.add_argument("--scenario", help="scenario JSON document")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-hours", type=float, default=6.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compress-report", parents=[common], help="batch size against duration")
    p.add_argument("path")
    p.add_argument("--hours", type=float, nargs="+", default=[0.5, 1, 3, 6])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compress_report)
    return parser


# Helpers

def _setup(args: argparse.Namespace) -> Tuple[Config, PipelineConfig]:
    config = Config(args.config)
    logger.setLevel(args.log_level or config.log_level)
    log_file = args.log_file or config.log_file
    if log_file:
        logger.add_file_handler(log_file)
    overrides = {name: getattr(args, name, None) for name in PipelineConfig.model_fields}
    return config, config.pipeline(overrides)


def _store(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> TraceStore:
    root = getattr(args, "store", None) or config.store_dir
    if not root:
        raise ConfigurationError("no trace store given (--store or MTRACE_STORE_DIR)")
    return TraceStore(root, cfg)


def _users(args: argparse.Namespace, store: TraceStore) -> List[str]:
    users = sorted(set(args.users)) if args.users else store.users()
    for user in users:
        if not store.has_user(user):
            raise UnknownUser(f"no partition for user {user!r} in {store.root}")
    return users


def _load(store: TraceStore, user: str, window: TimeWindow) -> Tuple[ScanList, GpsTrack]:
    return store.load_scans(user, window), store.load_track(user, window)


def _fan_out(func: Callable[..., Any], items: Sequence[Any], cfg: PipelineConfig, *extra: Any) -> List[Any]:
    """Apply ``func`` per item over ``cfg.n_jobs`` workers, keeping item order."""
    if cfg.n_jobs == 1 or len(items) < 2:
        return [func(item, *extra) for item in items]
    return list(Parallel(n_jobs=cfg.n_jobs)(delayed(func)(item, *extra) for item in items))


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _start(command: str, cfg: PipelineConfig,
           store: Optional[TraceStore] = None, users: Sequence[str] = (), **parameters: Any) -> RunManifest:
    manifest = RunManifest.start(command, cfg, **parameters)
    for user in users:
        manifest.add_input(f"store:{user}", store.digest(user))
    return manifest


# Commands

def cmd_ingest(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> int:
    """
    Ingest batch files into the store.

    Returns:
        int: 0 when every record line was accepted (or ``--tolerate-rejects``), 2 otherwise
    """
    store = _store(args, config, cfg)
    rejected = 0
    for path in args.paths:
        report = ingest_file(path, store)
        rejected += len(report.rejects)
        print(f"{path}: {report.new_records} new records, {report.duplicates} duplicates, "
              f"{len(report.rejects)} rejected")
        for reject in report.rejects:
            print(f"  line {reject.line_number}: {reject.error}: {reject.reason}", file=sys.stderr)
    if rejected and not args.tolerate_rejects:
        return 2
    return 0


def _user_pois(user: str, store: TraceStore, window: TimeWindow,
               cfg: PipelineConfig, registry: Optional[PoiRegistry] = None) -> Tuple[UserPois, GpsTrack]:
    scans, track = _load(store, user, window)
    return extract_user_pois(track, scans, cfg, window, registry), track


def cmd_poi(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> int:
    """POI table (CSV) and POI points (GeoJSON) per user and stay region."""
    store = _store(args, config, cfg)
    users = _users(args, store)
    window = _window(args)
    manifest = _start("poi", cfg, store, users, start=window.start, end=window.end,
                      registry=bool(args.registry))
    with logger.stage("poi", manifest.timings):
        if args.registry:
            registry = PoiRegistry(args.registry)
            manifest.add_input("registry", registry.digest())
            results = [_user_pois(user, store, window, cfg, registry) for user in users]
            registry.save()
        else:
            results = _fan_out(_user_pois, users, cfg, store, window, cfg)
    pois = [r for r, _ in results]
    tracks = {r.user_id: track for r, track in results}

    out = _out_dir(args)
    write_csv(out / "pois.csv", poi_table(pois, cfg), manifest)
    write_geojson(out / "pois.geojson", poi_features(pois, tracks, cfg), manifest)
    manifest.write(out)
    for result in pois:
        print(f"{result.user_id}: {len(result.regions)} stay regions, {result.poi_count} POIs")
    return 0


def _neighborhood(user: str, store: TraceStore, window: TimeWindow, cfg: PipelineConfig):
    scans, track = _load(store, user, window)
    stays = extract_stay_points(clean_track(track, cfg), cfg)
    home = identify_home(cluster_stay_points(stays, cfg))
    return extract_neighborhood(track, scans, home, window, cfg)


def cmd_neighborhood(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> int:
    """Home, neighbourhood POIs and movement heatmap of each user as one GeoJSON file."""
    store = _store(args, config, cfg)
    users = _users(args, store)
    window = _window(args)
    manifest = _start("neighborhood", cfg, store, users, start=window.start, end=window.end)
    with logger.stage("neighborhood", manifest.timings):
        reports = _fan_out(_neighborhood, users, cfg, store, window, cfg)

    out = _out_dir(args)
    features: List[Dict[str, Any]] = []
    for report in reports:
        features.extend(neighborhood_features(report))
        print(f"{report.user_id}: {report.place_count} places with WiFi "
              f"({len(report.neighborhood_pois)} neighborhood POIs), {report.gps_place_count} with GPS alone, "
              f"{report.moving_points_total} moving fixes")
    write_geojson(out / "neighborhood.geojson", features, manifest)
    manifest.write(out)
    return 0


def _travel(user: str, store: TraceStore, window: TimeWindow, cfg: PipelineConfig) -> Tuple[ScanList, GpsTrack]:
    scans, track = _load(store, user, window)
    stays = extract_stay_points(clean_track(track, cfg), cfg)
    _, travel_scans = extract_travel_windows(stays, track, scans)
    return travel_scans, track


def cmd_micro(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> int:
    """Simplified paths (GeoJSON) at ``micromobility_eps`` and a threshold sweep (CSV)."""
    store = _store(args, config, cfg)
    users = _users(args, store)
    window = _window(args)
    manifest = _start("micro", cfg, store, users, start=window.start, end=window.end,
                      eps=list(args.eps))
    with logger.stage("travel_windows", manifest.timings):
        parts = _fan_out(_travel, users, cfg, store, window, cfg)
    trajectory = Trajectory.pooled(parts)
    with logger.stage("cluster_paths", manifest.timings):
        clusters = cluster_paths(trajectory, cfg)
    with logger.stage("sweep", manifest.timings):
        rows = sweep_paths(trajectory, args.eps, cfg)

    out = _out_dir(args)
    write_geojson(out / "paths.geojson", path_features(trajectory, clusters), manifest)
    write_csv(out / "sweep.csv", sweep_table(rows), manifest)
    manifest.write(out)
    print(f"{len(trajectory.scans)} trajectory scans -> {len(clusters)} representatives "
          f"at eps={cfg.micromobility_eps}")
    return 0


def _community_nodes(results: Sequence[UserPois], args: argparse.Namespace) -> List[PoiNode]:
    nodes = []
    for result in results:
        for region in result.regions:
            if args.lat is not None and args.lon is not None:
                lat, lon = region.region.centroid
                if haversine_m(args.lat, args.lon, lat, lon) > args.radius_m:
                    continue
            for cluster in region.clusters:
                nodes.append(PoiNode(result.user_id, cluster.poi_id, cluster.fingerprint, region.region_id))
    return nodes


def cmd_communities(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> int:
    """Community id per POI of every user inside a place region."""
    if (args.lat is None) != (args.lon is None):
        raise ValidationError("--lat and --lon go together")
    store = _store(args, config, cfg)
    users = _users(args, store)
    window = _window(args)
    threshold = cfg.louvain_partition_threshold if args.threshold is None else args.threshold
    manifest = _start("communities", cfg, store, users, start=window.start, end=window.end,
                      threshold=threshold, lat=args.lat, lon=args.lon, radius_m=args.radius_m,
                      sweep=list(args.sweep or []))
    with logger.stage("poi", manifest.timings):
        results = [r for r, _ in _fan_out(_user_pois, users, cfg, store, window, cfg)]
    nodes = _community_nodes(results, args)
    with logger.stage("louvain", manifest.timings):
        graph, partition = detect_communities(nodes, threshold)

    out = _out_dir(args)
    write_csv(out / "communities.csv", community_table(nodes, partition), manifest)
    if args.sweep:
        rows = sweep_partition_threshold(nodes, args.sweep)
        write_csv(out / "community_sweep.csv", pd.DataFrame([asdict(r) for r in rows]), manifest)
    manifest.write(out)
    print(f"{len(nodes)} POIs, {graph.edge_count} edges -> {partition.community_count} communities "
          f"(modularity {partition.modularity:.4f})")
    return 0


def cmd_synth(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> int:
    """Simulate a preset (or a world/scenario pair) into batch files and a truth table."""
    if args.preset:
        world, scenario = get_preset(args.preset)
    elif args.world and args.scenario:
        world, scenario = World.load(args.world), Scenario.load(args.scenario)
    else:
        raise ConfigurationError("synth needs --preset, or --world with --scenario")
    manifest = RunManifest.start("synth", cfg, preset=args.preset, seed=args.seed,
                                 batch_hours=args.batch_hours)
    manifest.add_input("world", _digest(world.model_dump_json().encode("utf-8")))
    manifest.add_input("scenario", _digest(scenario.model_dump_json().encode("utf-8")))
    with logger.stage("simulate", manifest.timings):
        traces = simulate(world, scenario, cfg, args.seed)
    out = _out_dir(args)
    paths = write_dataset(traces, out, args.batch_hours)
    manifest.outputs.extend(str(p) for p in paths)
    manifest.write(out)
    print(f"{len(traces)} users, {len(paths)} batches written to {out}")
    return 0


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def cmd_compress_report(args: argparse.Namespace, config: Config, cfg: PipelineConfig) -> int:
    """Raw against compressed size of the leading hours of a batch file."""
    batch = read_batches([args.path], cfg)[0]
    rows = compression_table(batch, args.hours)
    frame = pd.DataFrame([{"hours": r.hours, "records": r.records, "raw_bytes": r.raw_bytes,
                           "compressed_bytes": r.compressed_bytes, "ratio": r.ratio} for r in rows])
    manifest = RunManifest.start("compress-report", cfg, hours=list(args.hours))
    manifest.add_input(Path(args.path).name, _digest(Path(args.path).read_bytes()))
    out = _out_dir(args)
    write_csv(out / "compression.csv", frame, manifest)
    manifest.write(out)
    for r in rows:
        print(f"{r.hours:>5} h  {r.records:>6} records  {r.raw_bytes:>9} B -> {r.compressed_bytes:>8} B  "
              f"({r.ratio:.1f}x)")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Returns:
        int: Process exit code: 0 on success, 1 on a domain error, 2 on an I/O or format error
    """
    args = build_parser().parse_args(argv)
    try:
        config, cfg = _setup(args)
        return args.func(args, config, cfg)
    except MTraceError as e:
        logger.error("command failed", {"command": args.command, "error": type(e).__name__, "detail": str(e)})
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("unexpected error", {"command": args.command})
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
