# Exceptions

from typing import Optional


class MTraceError(Exception):
    """Base exception class for mtrace.

    ``exit_code`` is what the command line reports when the error escapes a
    command: 1 for domain errors, 2 for I/O and format errors.
    """
    exit_code = 1


class DomainError(MTraceError):
    """Raised when an operation is called outside its domain."""
    pass


class ValidationError(DomainError):
    """Raised when input validation fails."""
    pass


class MalformedMac(ValidationError):
    """Raised when a MAC address is not 12 hex digits."""
    pass


class OutOfRangeRss(ValidationError):
    """Raised when an RSS reading is not a negative dBm value in range."""
    pass


class MissingTimestamp(ValidationError):
    """Raised when a record carries no usable timestamp."""
    pass


class EmptyFingerprint(DomainError):
    """Raised when a similarity is requested for a fingerprint with no APs."""
    pass


class EmptyCluster(DomainError):
    """Raised when a fingerprint is requested for a cluster with no members."""
    pass


class NoStayPoints(DomainError):
    """Raised when home identification gets no stay regions."""
    pass


class InsufficientGps(DomainError):
    """Raised when a trajectory has scans but no GPS fix to anchor them."""
    pass


class UnknownUser(DomainError):
    """Raised when a user has no partition in the trace store."""
    pass


class FormatError(MTraceError):
    """Raised when on-disk data cannot be read."""
    exit_code = 2


class CorruptStream(FormatError):
    """Raised when a compressed batch stream cannot be decompressed."""
    pass


class SchemaViolation(FormatError):
    """Raised when a record line does not follow the trace line format."""
    def __init__(self, reason: str, line_number: Optional[int] = None):
        self.reason = reason
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{where}{reason}")


class StoreError(FormatError):
    """Raised when the trace store cannot be read or written."""
    pass


class StoreLocked(StoreError):
    """Raised when another writer holds a user partition."""
    pass


class ConfigurationError(FormatError):
    """Raised when there's an issue with the application configuration."""
    pass
