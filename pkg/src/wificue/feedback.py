"""Durable community feedback store (append-only JSONL, like the history store)."""

from __future__ import annotations

import json
import logging
import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Optional, Union

from .errors import FutureTimestamp, SchemaViolation, StorageIO
from .model import (
    Bssid,
    MalformedBssid,
    MulticastBssid,
    format_rfc3339,
    parse_bssid,
    parse_rfc3339,
)
from .recommend import FeedbackCategory, FeedbackReport

log = logging.getLogger(__name__)

_FIELDS = ("bssid", "ssid", "category", "observed_at", "reporter_id")


def report_to_dict(report: FeedbackReport) -> dict[str, Any]:
    return {
        "bssid": str(report.bssid),
        "ssid": report.ssid,
        "category": report.category.value,
        "observed_at": format_rfc3339(report.observed_at),
        "reporter_id": report.reporter_id,
    }


def report_from_dict(record: Any, *, line_no: Optional[int] = None,
                     now: Optional[datetime] = None) -> FeedbackReport:
    """Validate a feedback wire dict; reject future timestamps when now given."""
    if not isinstance(record, dict):
        raise SchemaViolation("feedback record must be a JSON object",
                              line_no=line_no)
    unknown = set(record) - set(_FIELDS)
    if unknown:
        name = sorted(unknown)[0]
        raise SchemaViolation(f"unknown field {name!r}", field=name,
                              line_no=line_no)
    for key in _FIELDS:
        if key not in record:
            raise SchemaViolation(f"missing field {key!r}", field=key,
                                  line_no=line_no)
        if not isinstance(record[key], str):
            raise SchemaViolation(f"field {key!r} must be a string", field=key,
                                  line_no=line_no)
    try:
        bssid = parse_bssid(record["bssid"])
    except (MalformedBssid, MulticastBssid) as exc:
        raise SchemaViolation(str(exc), field="bssid", line_no=line_no) from None
    try:
        category = FeedbackCategory(record["category"])
    except ValueError:
        raise SchemaViolation(f"unknown category {record['category']!r}",
                              field="category", line_no=line_no) from None
    try:
        observed_at = parse_rfc3339(record["observed_at"])
    except ValueError as exc:
        raise SchemaViolation(str(exc), field="observed_at",
                              line_no=line_no) from None
    if now is not None and observed_at > now:
        raise FutureTimestamp(
            f"feedback observed_at {record['observed_at']} is in the future")
    if not record["reporter_id"]:
        raise SchemaViolation("reporter_id must be non-empty",
                              field="reporter_id", line_no=line_no)
    return FeedbackReport(bssid=bssid, ssid=record["ssid"], category=category,
                          observed_at=observed_at,
                          reporter_id=record["reporter_id"])


class FeedbackStore:
    """Append-only JSONL store of feedback reports."""

    def __init__(self, path: Union[str, Path]):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._by_bssid: dict[Bssid, list[FeedbackReport]] = {}
        try:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            if self._path.exists():
                self._load()
            self._handle = open(self._path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageIO(f"cannot open feedback store at {self._path}: {exc}") from None

    @property
    def path(self) -> Path:
        return self._path

    def _load(self) -> None:
        with open(self._path, "r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    report = report_from_dict(json.loads(line), line_no=line_no)
                except (json.JSONDecodeError, SchemaViolation) as exc:
                    raise StorageIO(
                        f"corrupt feedback store {self._path}: {exc}") from None
                self._by_bssid.setdefault(report.bssid, []).append(report)

    def append(self, report: FeedbackReport) -> None:
        with self._lock:
            line = json.dumps(report_to_dict(report), separators=(",", ":"))
            try:
                self._handle.write(line + "\n")
                self._handle.flush()
            except (OSError, ValueError) as exc:
                raise StorageIO(f"cannot append to {self._path}: {exc}") from None
            self._by_bssid.setdefault(report.bssid, []).append(report)

    def reports_for(self, bssid: Bssid) -> list[FeedbackReport]:
        with self._lock:
            return list(self._by_bssid.get(bssid, ()))

    def close(self) -> None:
        with self._lock:
            try:
                self._handle.close()
            except OSError:  # pragma: no cover
                pass

    def __enter__(self) -> "FeedbackStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
