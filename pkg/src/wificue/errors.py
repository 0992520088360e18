"""Structured error types shared across the package.

Every error carries a stable machine-readable ``code`` so CLI output and API
error envelopes can expose the same vocabulary.
"""

from __future__ import annotations

from typing import Any, Optional


class WifiCueError(Exception):
    """Base class for all structured errors raised by this package."""

    code = "ERROR"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = {k: v for k, v in details.items() if v is not None}

    def __str__(self) -> str:
        if self.details:
            extras = ", ".join(f"{k}={v}" for k, v in sorted(self.details.items()))
            return f"{self.message} ({extras})"
        return self.message


class MalformedBssid(WifiCueError):
    """BSSID text is not six colon- or dash-separated hex octets."""

    code = "MALFORMED"


class MulticastBssid(WifiCueError):
    """BSSID has the multicast bit set; it cannot identify an access point."""

    code = "MULTICAST_ADDRESS"


class SchemaViolation(WifiCueError):
    """A record failed wire-format validation (unknown/missing/bad field)."""

    code = "SCHEMA_VIOLATION"

    def __init__(self, message: str, *, field: Optional[str] = None,
                 line_no: Optional[int] = None):
        super().__init__(message, field=field, line_no=line_no)
        self.field = field
        self.line_no = line_no


class MalformedHeader(WifiCueError):
    """A tabular input file does not start with the expected header."""

    code = "MALFORMED_HEADER"


class MalformedLine(WifiCueError):
    """A registry or data line could not be parsed."""

    code = "MALFORMED_LINE"

    def __init__(self, message: str, *, line_no: Optional[int] = None):
        super().__init__(message, line_no=line_no)
        self.line_no = line_no


class EmptyRegistry(WifiCueError):
    """A vendor registry load produced zero usable entries."""

    code = "EMPTY_REGISTRY"


class EmptyBatch(WifiCueError):
    """An operation that needs observations received none."""

    code = "EMPTY_BATCH"


class StorageIO(WifiCueError):
    """The append-only store could not be opened, read, or written."""

    code = "STORAGE_IO"


class FutureTimestamp(WifiCueError):
    """A report or observation claims a time in the future."""

    code = "FUTURE_TIMESTAMP"


class WigleError(WifiCueError):
    """Base class for enrichment-lookup failures."""

    code = "WIGLE_ERROR"


class WigleAuthFailed(WigleError):
    code = "AUTH_FAILED"


class WigleQuotaExceeded(WigleError):
    code = "QUOTA_EXCEEDED"


class WigleNetworkError(WigleError):
    code = "NETWORK_ERROR"


class WigleMalformedResponse(WigleError):
    code = "MALFORMED_RESPONSE"


class ConfigError(WifiCueError):
    """Service or CLI configuration is unusable (bad operator file, bad flag)."""

    code = "CONFIG_ERROR"
