"""Trace batch codec and the per-user trace store."""
from ingest.codec import (
    EXTENSION, Batch, CompressionRow, LineReject, ParsedBatch, compression_table,
    decode_batch, encode_batch, parse_batch, read_batches, split_into_batches,
)
from ingest.store import IngestReport, TraceStore, atomic_write, ingest_batch, ingest_file

__all__ = [
    'EXTENSION', 'Batch', 'CompressionRow', 'IngestReport', 'LineReject', 'ParsedBatch',
    'TraceStore', 'atomic_write', 'compression_table', 'decode_batch', 'encode_batch',
    'ingest_batch', 'ingest_file', 'parse_batch', 'read_batches', 'split_into_batches',
]
