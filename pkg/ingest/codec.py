"""Trace batch wire format.

A batch is gzip-compressed UTF-8 text, one JSON object per line, ``\\n``
terminated. The first line is a header naming the user and the batch
interval; every following line is a WiFi scan or a GPS fix::

    {"k":"h","user":"u1","start":1700000000,"end":1700021600}
    {"t":1700000000,"k":"w","ap":[["aabbccddeeff",-55],["a0b1c2d3e4f5",-71]]}
    {"t":1700000003,"k":"g","lat":1.3,"lon":103.8,"acc":12.5}

Files carry the ``.mtrace.gz`` extension.
"""

import gzip
import json
import zlib
from dataclasses import dataclass, field
from typing import Annotated, Iterable, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter
from pydantic import ValidationError as PydanticValidationError

from model.config import PipelineConfig
from model.types import GpsPoint, GpsTrack, ScanList, ScanResult, TimeWindow
from utils.exceptions import CorruptStream, SchemaViolation, ValidationError
from utils.validators import TraceValidator

EXTENSION = ".mtrace.gz"
SCAN, FIX = "w", "g"

Record = Union[ScanResult, GpsPoint]


def record_kind(record: Record) -> str:
    return SCAN if isinstance(record, ScanResult) else FIX


class HeaderLine(BaseModel):
    model_config = ConfigDict(extra="forbid")
    k: Literal["h"]
    user: str = Field(min_length=1)
    start: int = Field(ge=0)
    end: int = Field(ge=0)


class ScanLine(BaseModel):
    model_config = ConfigDict(extra="forbid")
    t: int
    k: Literal["w"]
    ap: List[Tuple[str, int]]


class FixLine(BaseModel):
    model_config = ConfigDict(extra="forbid")
    t: int
    k: Literal["g"]
    lat: float
    lon: float
    acc: float


RecordLine = TypeAdapter(Annotated[Union[ScanLine, FixLine], Field(discriminator="k")])


@dataclass(frozen=True)
class Batch:
    """Time-ordered records of one user within ``[start, end)``."""
    user_id: str
    start: int
    end: int
    records: Tuple[Record, ...] = ()

    def __post_init__(self):
        if not self.user_id:
            raise ValidationError("batch needs a user id")
        if self.end <= self.start:
            raise ValidationError(f"empty batch interval [{self.start}, {self.end})")
        records = tuple(self.records)
        for prev, cur in zip(records, records[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValidationError("batch records must be time-ordered")
        for record in records:
            if not self.start <= record.timestamp < self.end:
                raise ValidationError(f"record at {record.timestamp} outside batch interval [{self.start}, {self.end})")
        object.__setattr__(self, "records", records)

    @property
    def hours(self) -> float:
        return (self.end - self.start) / 3600

    @property
    def scans(self) -> ScanList:
        return ScanList(self.user_id, tuple(r for r in self.records if isinstance(r, ScanResult)))

    @property
    def track(self) -> GpsTrack:
        return GpsTrack(self.user_id, tuple(r for r in self.records if isinstance(r, GpsPoint)))


@dataclass(frozen=True)
class LineReject:
    line_number: int
    error: str
    reason: str


@dataclass(frozen=True)
class ParsedBatch:
    """A decoded batch with the lines that failed validation."""
    batch: Batch
    rejects: Tuple[LineReject, ...] = field(default_factory=tuple)
    line_count: int = 0


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def record_line(record: Record) -> str:
    if isinstance(record, ScanResult):
        return _dumps({"t": record.timestamp, "k": SCAN, "ap": [[o.mac, o.rss] for o in record.observations]})
    return _dumps({"t": record.timestamp, "k": FIX, "lat": record.latitude,
                   "lon": record.longitude, "acc": record.accuracy})


def batch_text(batch: Batch) -> str:
    """Uncompressed batch text."""
    header = _dumps({"k": "h", "user": batch.user_id, "start": batch.start, "end": batch.end})
    return "".join(f"{line}\n" for line in [header, *map(record_line, batch.records)])


def encode_batch(batch: Batch) -> bytes:
    """
    Compress a batch into its on-disk form.

    The gzip header carries no timestamp, so equal batches encode to equal bytes.

    Args:
        batch (Batch): The batch

    Returns:
        bytes: gzip stream of the batch text
    """
    return gzip.compress(batch_text(batch).encode("utf-8"), compresslevel=9, mtime=0)


def _decompress(data: bytes) -> str:
    try:
        return gzip.decompress(data).decode("utf-8")
    except (OSError, EOFError, zlib.error) as e:
        raise CorruptStream(f"cannot decompress batch: {e}") from e
    except UnicodeDecodeError as e:
        raise CorruptStream(f"batch is not UTF-8 text: {e}") from e


def _pydantic_reason(e: PydanticValidationError) -> str:
    first = e.errors()[0]
    where = ".".join(str(part) for part in first.get("loc", ()))
    return f"{where}: {first.get('msg')}" if where else str(first.get("msg"))


def _parse_header(line: str) -> HeaderLine:
    try:
        return HeaderLine.model_validate_json(line)
    except PydanticValidationError as e:
        raise SchemaViolation(f"invalid header: {_pydantic_reason(e)}", 1) from e


def _parse_record(line: str, line_number: int, window: TimeWindow) -> Record:
    try:
        parsed = RecordLine.validate_json(line)
    except PydanticValidationError as e:
        raise SchemaViolation(_pydantic_reason(e), line_number) from e
    try:
        if isinstance(parsed, ScanLine):
            record = TraceValidator.validate_scan(parsed.ap, parsed.t)
        else:
            record = TraceValidator.validate_fix(parsed.lat, parsed.lon, parsed.acc, parsed.t)
    except ValidationError as e:
        raise SchemaViolation(f"{type(e).__name__}: {e}", line_number) from e
    if not window.contains(record.timestamp):
        raise SchemaViolation(f"record at {record.timestamp} outside batch interval "
                              f"[{window.start}, {window.end})", line_number)
    return record


def _lines(text: str) -> List[str]:
    if text and not text.endswith("\n"):
        raise SchemaViolation("batch text must end with a newline", text.count("\n") + 1)
    return text.split("\n")[:-1] if text else []


def _header_window(header: HeaderLine, cfg: Optional[PipelineConfig]) -> TimeWindow:
    try:
        window = TimeWindow(header.start, header.end)
    except ValidationError as e:
        raise SchemaViolation(str(e), 1) from e
    max_hours = (cfg or PipelineConfig()).max_batch_hours
    if (header.end - header.start) / 3600 > max_hours:
        raise SchemaViolation(f"batch interval exceeds {max_hours} hours", 1)
    return window


def parse_batch(data: bytes, cfg: Optional[PipelineConfig] = None) -> ParsedBatch:
    """
    Decode a batch, collecting bad record lines instead of failing on them.

    Records are returned in timestamp order.

    Args:
        data (bytes): gzip stream
        cfg (Optional[PipelineConfig]): Supplies ``max_batch_hours``

    Returns:
        ParsedBatch: The valid records and one reject per bad line

    Raises:
        CorruptStream: If the stream does not decompress
        SchemaViolation: If the header is missing or invalid
    """
    lines = _lines(_decompress(data))
    if not lines:
        raise SchemaViolation("missing batch header", 1)
    header = _parse_header(lines[0])
    window = _header_window(header, cfg)

    records: List[Record] = []
    rejects: List[LineReject] = []
    for line_number, line in enumerate(lines[1:], start=2):
        try:
            records.append(_parse_record(line, line_number, window))
        except SchemaViolation as e:
            rejects.append(LineReject(line_number, type(e).__name__, e.reason))
    records.sort(key=lambda r: r.timestamp)
    return ParsedBatch(Batch(header.user, header.start, header.end, tuple(records)), tuple(rejects), len(lines))


def decode_batch(data: bytes, cfg: Optional[PipelineConfig] = None) -> Batch:
    """
    Decode a batch strictly.

    Raises:
        CorruptStream: If the stream does not decompress
        SchemaViolation: On the first invalid line, with its line number
    """
    lines = _lines(_decompress(data))
    if not lines:
        raise SchemaViolation("missing batch header", 1)
    header = _parse_header(lines[0])
    window = _header_window(header, cfg)
    records = [_parse_record(line, n, window) for n, line in enumerate(lines[1:], start=2)]
    try:
        return Batch(header.user, header.start, header.end, tuple(records))
    except ValidationError as e:
        raise SchemaViolation(str(e)) from e


def split_into_batches(scans: ScanList, track: GpsTrack, hours: float = 6.0) -> List[Batch]:
    """
    Cut a user's samples into consecutive batches aligned to ``hours``.

    Only batches holding at least one record are returned.
    """
    length = int(hours * 3600)
    records: List[Record] = sorted([*scans, *track], key=lambda r: (r.timestamp, record_kind(r)))
    batches: List[Batch] = []
    current: List[Record] = []
    start = None
    for record in records:
        slot = record.timestamp // length * length
        if start is not None and slot != start:
            batches.append(Batch(scans.user_id, start, start + length, tuple(current)))
            current = []
        start = slot
        current.append(record)
    if current:
        batches.append(Batch(scans.user_id, start, start + length, tuple(current)))
    return batches


@dataclass(frozen=True)
class CompressionRow:
    hours: float
    records: int
    raw_bytes: int
    compressed_bytes: int

    @property
    def ratio(self) -> float:
        return self.raw_bytes / self.compressed_bytes


def compression_table(batch: Batch, hours: Sequence[float] = (0.5, 1, 3, 6)) -> List[CompressionRow]:
    """Raw and compressed size of the leading ``h`` hours of a batch, per ``h``."""
    rows = []
    for h in hours:
        end = min(batch.end, batch.start + int(h * 3600))
        head = Batch(batch.user_id, batch.start, end,
                     tuple(r for r in batch.records if r.timestamp < end))
        raw = batch_text(head).encode("utf-8")
        rows.append(CompressionRow(h, len(head.records), len(raw), len(encode_batch(head))))
    return rows


def read_batches(paths: Iterable[str], cfg: Optional[PipelineConfig] = None) -> List[Batch]:
    """Strictly decode several batch files."""
    batches = []
    for path in paths:
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as e:
            raise CorruptStream(f"cannot read {path}: {e}") from e
        batches.append(decode_batch(data, cfg))
    return batches
