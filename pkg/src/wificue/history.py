"""Durable observation history: append-only JSONL store plus deviation checks.

The store keeps one canonical JSON line per accepted observation. Re-opening
rebuilds the in-memory index from the file, so every accepted append survives
process restart. Duplicates (same bssid, observed_at, scanner_id) are ignored.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .errors import SchemaViolation, StorageIO
from .ingest import ScanBatch
from .model import (
    AccessPointObservation,
    Bssid,
    Ssid,
    decode_observation,
    encode_observation,
)

log = logging.getLogger(__name__)

DedupeKey = tuple[Bssid, datetime, str]


@dataclass(frozen=True)
class ApHistory:
    """All stored records for one BSSID, ascending by (observed_at, scanner_id)."""

    bssid: Bssid
    records: tuple[AccessPointObservation, ...]

    @property
    def latest(self) -> Optional[AccessPointObservation]:
        return self.records[-1] if self.records else None


@dataclass(frozen=True)
class HistoryPage:
    """One page of a BSSID's records, most recent first."""

    bssid: Bssid
    total: int
    limit: int
    offset: int
    records: tuple[AccessPointObservation, ...]


class DeviationKind(Enum):
    SECURITY_CHANGED = "SECURITY_CHANGED"
    SSID_CHANGED = "SSID_CHANGED"
    CHANNEL_CHANGED = "CHANNEL_CHANGED"


@dataclass(frozen=True)
class Deviation:
    """A tracked field that differs from this AP's most recent prior record."""

    kind: DeviationKind
    before: str
    after: str
    first_seen_before: datetime
    seen_after: datetime

    def __post_init__(self):
        if self.before == self.after:
            raise ValueError("deviation requires differing values")


def _record_order(obs: AccessPointObservation) -> tuple[datetime, str]:
    return (obs.observed_at, obs.scanner_id)


class HistoryStore:
    """Append-only store of observations at a filesystem path."""

    def __init__(self, path: Union[str, Path]):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[Bssid, list[AccessPointObservation]] = {}
        self._keys: set[DedupeKey] = set()
        self._ssid_index: dict[bytes, set[Bssid]] = {}
        try:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            if self._path.exists():
                self._load()
            self._handle = open(self._path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageIO(f"cannot open history store at {self._path}: {exc}") from None

    @property
    def path(self) -> Path:
        return self._path

    def _load(self) -> None:
        with open(self._path, "r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obs = decode_observation(line, line_no=line_no)
                except SchemaViolation as exc:
                    raise StorageIO(
                        f"corrupt history store {self._path}: {exc}") from None
                self._remember(obs)

    def _remember(self, obs: AccessPointObservation) -> bool:
        key = (obs.bssid, obs.observed_at, obs.scanner_id)
        if key in self._keys:
            return False
        self._keys.add(key)
        bucket = self._index.setdefault(obs.bssid, [])
        bucket.append(obs)
        bucket.sort(key=_record_order)
        self._ssid_index.setdefault(obs.ssid.data, set()).add(obs.bssid)
        return True

    def append(self, batch: ScanBatch) -> int:
        """Persist new observations; returns how many were actually appended."""
        with self._lock:
            fresh = [obs for obs in batch.observations
                     if (obs.bssid, obs.observed_at, obs.scanner_id) not in self._keys]
            if not fresh:
                return 0
            payload = "".join(encode_observation(obs) + "\n" for obs in fresh)
            try:
                self._handle.write(payload)
                self._handle.flush()
            except (OSError, ValueError) as exc:
                raise StorageIO(f"cannot append to {self._path}: {exc}") from None
            for obs in fresh:
                self._remember(obs)
            return len(fresh)

    def full_history(self, bssid: Bssid) -> ApHistory:
        with self._lock:
            records = tuple(self._index.get(bssid, ()))
        return ApHistory(bssid=bssid, records=records)

    def history(self, bssid: Bssid, *, limit: int = 50,
                offset: int = 0) -> HistoryPage:
        """Page through a BSSID's records, newest first."""
        if limit < 0 or offset < 0:
            raise ValueError("limit and offset must be non-negative")
        with self._lock:
            records = list(self._index.get(bssid, ()))
        newest_first = list(reversed(records))
        window = tuple(newest_first[offset:offset + limit])
        return HistoryPage(bssid=bssid, total=len(records), limit=limit,
                           offset=offset, records=window)

    def bssids_for_ssid(self, ssid: Ssid) -> set[Bssid]:
        """Every BSSID that has ever carried this (non-hidden) SSID."""
        if ssid.hidden:
            return set()
        with self._lock:
            return set(self._ssid_index.get(ssid.data, set()))

    def bssids(self) -> set[Bssid]:
        with self._lock:
            return set(self._index)

    def close(self) -> None:
        with self._lock:
            try:
                self._handle.close()
            except OSError:  # pragma: no cover
                pass

    def __enter__(self) -> "HistoryStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def detect_deviations(history: ApHistory,
                      new_obs: AccessPointObservation) -> list[Deviation]:
    """Compare an observation with its AP's most recent strictly-prior record.

    Returns deviations in a fixed order (security, ssid, channel); an AP with
    no prior records deviates from nothing.
    """
    if history.bssid != new_obs.bssid:
        raise ValueError("history and observation refer to different BSSIDs")
    prior = [r for r in history.records if r.observed_at < new_obs.observed_at]
    if not prior:
        return []
    latest = prior[-1]
    deviations: list[Deviation] = []

    def first_seen_with(getter) -> datetime:
        # walk back through the run of records sharing the latest value
        anchor = getter(latest)
        first = latest.observed_at
        for record in reversed(prior):
            if getter(record) != anchor:
                break
            first = record.observed_at
        return first

    if latest.security is not new_obs.security:
        deviations.append(Deviation(
            kind=DeviationKind.SECURITY_CHANGED,
            before=latest.security.value, after=new_obs.security.value,
            first_seen_before=first_seen_with(lambda r: r.security),
            seen_after=new_obs.observed_at))
    if latest.ssid.data != new_obs.ssid.data:
        deviations.append(Deviation(
            kind=DeviationKind.SSID_CHANGED,
            before=latest.ssid.display, after=new_obs.ssid.display,
            first_seen_before=first_seen_with(lambda r: r.ssid.data),
            seen_after=new_obs.observed_at))
    if latest.channel != new_obs.channel:
        deviations.append(Deviation(
            kind=DeviationKind.CHANNEL_CHANGED,
            before=str(latest.channel), after=str(new_obs.channel),
            first_seen_before=first_seen_with(lambda r: r.channel),
            seen_after=new_obs.observed_at))
    return deviations
