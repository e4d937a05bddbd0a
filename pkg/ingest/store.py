"""Per-user trace store.

Each user owns a directory of sealed segment files (ordinary ``.mtrace.gz``
batches) and an ``index.json`` listing them in write order::

    <root>/<user>/index.json
    <root>/<user>/segments/000001.mtrace.gz

Segments and the index are written to a temporary file and renamed into
place, so readers only ever see complete files. One writer per user is
enforced with an exclusive lock file.
"""

import hashlib
import json
import os
import re
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Set, Tuple

from ingest.codec import EXTENSION, Batch, LineReject, Record, decode_batch, encode_batch, parse_batch, record_kind
from model.config import PipelineConfig
from model.types import GpsPoint, GpsTrack, ScanList, ScanResult, TimeWindow
from utils.exceptions import FormatError, StoreError, StoreLocked, UnknownUser
from utils.log import logger

USER_PATTERN = re.compile(r'^(?!\.+$)[A-Za-z0-9_.@-]+$')
RecordKey = Tuple[str, int, str]


@dataclass
class IngestReport:
    """Outcome of ingesting one batch."""
    user_id: str
    source: str = ""
    records: int = 0
    new_records: int = 0
    duplicates: int = 0
    rejects: List[LineReject] = field(default_factory=list)
    segment: Optional[str] = None

    @property
    def ok(self) -> bool:
        return not self.rejects


def atomic_write(path: Path, data: bytes) -> None:
    """Write ``data`` to ``path`` through a temporary file and a rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class TraceStore:
    """Directory-per-user store of immutable batch segments."""

    def __init__(self, root: str, cfg: Optional[PipelineConfig] = None):
        self.root = Path(root)
        self.cfg = cfg or PipelineConfig()

    def _user_dir(self, user_id: str) -> Path:
        if not USER_PATTERN.match(user_id or ""):
            raise StoreError(f"user id not usable as a partition name: {user_id!r}")
        path = self.root / user_id
        root = self.root.resolve()
        if path.resolve().parent != root:
            raise StoreError(f"user partition escapes the store root: {user_id!r}")
        return path

    def _index_path(self, user_id: str) -> Path:
        return self._user_dir(user_id) / "index.json"

    def users(self) -> List[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "index.json").is_file())

    def has_user(self, user_id: str) -> bool:
        return self._index_path(user_id).is_file()

    def _read_index(self, user_id: str) -> Dict:
        path = self._index_path(user_id)
        if not path.is_file():
            return {"user": user_id, "segments": []}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise StoreError(f"unreadable index for {user_id}: {e}") from e

    @contextmanager
    def _writer(self, user_id: str) -> Iterator[None]:
        user_dir = self._user_dir(user_id)
        user_dir.mkdir(parents=True, exist_ok=True)
        lock = user_dir / ".lock"
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as e:
            raise StoreLocked(f"partition {user_id} is locked by another writer ({lock})") from e
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            lock.unlink(missing_ok=True)

    def _segments(self, user_id: str) -> List[Batch]:
        user_dir = self._user_dir(user_id)
        batches = []
        for entry in self._read_index(user_id)["segments"]:
            path = user_dir / entry["file"]
            try:
                data = path.read_bytes()
            except OSError as e:
                raise StoreError(f"missing segment {path}: {e}") from e
            batches.append(decode_batch(data, self.cfg))
        return batches

    def _records(self, user_id: str) -> List[Record]:
        if not self.has_user(user_id):
            raise UnknownUser(f"no partition for user {user_id!r} in {self.root}")
        records = [r for batch in self._segments(user_id) for r in batch.records]
        # stable: equal timestamps keep segment order
        records.sort(key=lambda r: r.timestamp)
        return records

    def keys(self, user_id: str) -> Set[RecordKey]:
        if not self.has_user(user_id):
            return set()
        return {(user_id, r.timestamp, record_kind(r)) for r in self._records(user_id)}

    def append(self, batch: Batch, source: str = "") -> IngestReport:
        """
        Append the records of ``batch`` the store does not hold yet.

        Args:
            batch (Batch): Validated records
            source (str): Where the batch came from, for the report

        Returns:
            IngestReport: Counts of new and duplicate records and the segment written, if any

        Raises:
            StoreLocked: If another writer holds the partition
        """
        report = IngestReport(batch.user_id, source, records=len(batch.records))
        with self._writer(batch.user_id):
            seen = self.keys(batch.user_id)
            fresh: List[Record] = []
            for record in batch.records:
                key = (batch.user_id, record.timestamp, record_kind(record))
                if key in seen:
                    report.duplicates += 1
                    continue
                seen.add(key)
                fresh.append(record)
            report.new_records = len(fresh)
            if fresh:
                report.segment = self._seal(Batch(batch.user_id, batch.start, batch.end, tuple(fresh)))
        logger.info("batch ingested", {
            "user": batch.user_id, "source": source, "new": report.new_records,
            "duplicates": report.duplicates,
        })
        return report

    def _seal(self, batch: Batch) -> str:
        user_dir = self._user_dir(batch.user_id)
        index = self._read_index(batch.user_id)
        data = encode_batch(batch)
        name = f"segments/{len(index['segments']) + 1:06d}{EXTENSION}"
        atomic_write(user_dir / name, data)
        index["segments"].append({
            "file": name,
            "start": batch.start,
            "end": batch.end,
            "records": len(batch.records),
            "sha256": hashlib.sha256(data).hexdigest(),
        })
        atomic_write(self._index_path(batch.user_id),
                     json.dumps(index, indent=2, sort_keys=True).encode("utf-8"))
        return name

    def load_scans(self, user_id: str, window: Optional[TimeWindow] = None) -> ScanList:
        """Scans of a user in timestamp order, optionally restricted to ``window``."""
        window = window or TimeWindow.everything()
        return ScanList(user_id, tuple(r for r in self._records(user_id)
                                       if isinstance(r, ScanResult) and window.contains(r.timestamp)))

    def load_track(self, user_id: str, window: Optional[TimeWindow] = None) -> GpsTrack:
        """GPS fixes of a user in timestamp order, optionally restricted to ``window``."""
        window = window or TimeWindow.everything()
        return GpsTrack(user_id, tuple(r for r in self._records(user_id)
                                       if isinstance(r, GpsPoint) and window.contains(r.timestamp)))

    def digest(self, user_id: str) -> str:
        """Digest of a user's partition, from the index's segment hashes."""
        index = self._read_index(user_id)
        payload = json.dumps([s["sha256"] for s in index["segments"]])
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def ingest_batch(stream: bytes, store: TraceStore, source: str = "") -> IngestReport:
    """
    Validate a batch stream and append its good records to the store.

    Bad record lines are reported with their line numbers and skipped; the
    remaining records are still stored. Ingesting the same batch twice adds
    nothing the second time.

    Args:
        stream (bytes): gzip batch stream
        store (TraceStore): Destination store
        source (str): Label for the report (usually the file name)

    Returns:
        IngestReport: Per-batch counts and the list of rejected lines

    Raises:
        CorruptStream: If the stream cannot be decompressed
        SchemaViolation: If the batch header is missing or invalid
    """
    parsed = parse_batch(stream, store.cfg)
    report = store.append(parsed.batch, source)
    report.records = parsed.line_count - 1
    report.rejects = list(parsed.rejects)
    for reject in parsed.rejects:
        logger.warning("record rejected", {"source": source, "line": reject.line_number,
                                           "error": reject.error, "reason": reject.reason})
    return report


def ingest_file(path: str, store: TraceStore) -> IngestReport:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    return ingest_batch(data, store, source=str(path))
