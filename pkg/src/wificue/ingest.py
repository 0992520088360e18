"""Scan-batch ingestion: canonical JSON lines, airodump-ng CSV, normalization.

Both parsers share the same strict/lenient error contract: strict mode aborts
on the first bad record, lenient mode skips bad records and counts them.
"""

from __future__ import annotations

import csv
import logging
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional

from .errors import MalformedHeader, SchemaViolation
from .model import (
    AccessPointObservation,
    Bssid,
    MalformedBssid,
    MulticastBssid,
    Ssid,
    decode_observation,
    parse_bssid,
    utc_now,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScanBatch:
    """A set of observations ingested together; normalized batches hold at most
    one observation per BSSID, sorted by BSSID."""

    scan_id: str
    observations: tuple[AccessPointObservation, ...]
    ingested_at: datetime

    def __post_init__(self):
        if self.ingested_at.tzinfo is None:
            raise ValueError("ingested_at must be timezone-aware")


@dataclass
class ParseReport:
    """Outcome of a lenient or strict parse run."""

    observations: list[AccessPointObservation] = field(default_factory=list)
    skipped: int = 0
    errors: list[SchemaViolation] = field(default_factory=list)


def new_scan_id() -> str:
    return uuid.uuid4().hex


def parse_canonical(lines: Iterable[str], *, strict: bool = True,
                    now: Optional[datetime] = None) -> ParseReport:
    """Parse canonical JSON lines. Blank lines are permitted and ignored.

    ``now`` anchors the 24h future-timestamp check; defaults to wall clock.
    """
    effective_now = now or utc_now()
    report = ParseReport()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            report.observations.append(
                decode_observation(line, line_no=line_no, now=effective_now))
        except SchemaViolation as exc:
            if strict:
                raise
            report.skipped += 1
            report.errors.append(exc)
            log.warning("skipping line %d: %s", line_no, exc)
    return report


def make_batch(observations: Iterable[AccessPointObservation], *,
               scan_id: Optional[str] = None,
               ingested_at: Optional[datetime] = None) -> ScanBatch:
    return ScanBatch(scan_id=scan_id or new_scan_id(),
                     observations=tuple(observations),
                     ingested_at=ingested_at or utc_now())


def normalize(batch: ScanBatch) -> ScanBatch:
    """Collapse duplicate BSSIDs and order the batch.

    Strongest signal wins; ties prefer the latest observed_at, then the record
    seen first in the input. Output is sorted by BSSID.
    """
    best: dict[Bssid, tuple[int, AccessPointObservation]] = {}
    for index, obs in enumerate(batch.observations):
        kept = best.get(obs.bssid)
        if kept is None:
            best[obs.bssid] = (index, obs)
            continue
        _, kept_obs = kept
        if (obs.rssi_dbm, obs.observed_at) > (kept_obs.rssi_dbm, kept_obs.observed_at):
            best[obs.bssid] = (index, obs)
    ordered = sorted(best.values(), key=lambda pair: pair[1].bssid.octets)
    return ScanBatch(scan_id=batch.scan_id,
                     observations=tuple(obs for _, obs in ordered),
                     ingested_at=batch.ingested_at)


_AIRODUMP_AP_HEADER = "BSSID, First time seen"
_AIRODUMP_STATION_HEADER = "Station MAC"
_AIRODUMP_COLUMNS = 15  # through the trailing Key column


def _airodump_capabilities(privacy: str, cipher: str, auth: str) -> str:
    """Rebuild a capability string from airodump's Privacy/Cipher/Auth columns."""
    privacy_values = privacy.split()
    if not privacy_values:
        return ""
    cipher_first = cipher.split()[0] if cipher.split() else ""
    auth_first = auth.split()[0] if auth.split() else ""
    tokens = []
    for value in privacy_values:
        if value == "OPN":
            tokens.append("[ESS]")
        elif value == "WEP":
            tokens.append("[WEP]")
        else:
            parts = [p for p in (value, auth_first, cipher_first) if p]
            tokens.append("[" + "-".join(parts) + "]")
    # dedupe while preserving order; OPN plus others would double [ESS]
    seen: set[str] = set()
    unique = [t for t in tokens if not (t in seen or seen.add(t))]
    return "".join(unique)


def _airodump_time(text: str, line_no: int) -> datetime:
    try:
        parsed = datetime.strptime(text.strip(), "%Y-%m-%d %H:%M:%S")
    except ValueError:
        raise SchemaViolation(f"invalid airodump timestamp: {text!r}",
                              field="observed_at", line_no=line_no) from None
    return parsed.replace(tzinfo=timezone.utc)


def parse_airodump_csv(lines: Iterable[str], *, scanner_id: str = "airodump",
                       strict: bool = True,
                       now: Optional[datetime] = None) -> ParseReport:
    """Parse the access-point section of an airodump-ng CSV export.

    The station section (if present) is ignored. A missing or misplaced
    AP header raises MALFORMED_HEADER.
    """
    effective_now = now or utc_now()
    report = ParseReport()
    header_seen = False
    for line_no, raw in enumerate(lines, start=1):
        line = raw.lstrip("﻿").rstrip("\r\n")
        stripped = line.strip()
        if not header_seen:
            if not stripped:
                continue
            if stripped.startswith(_AIRODUMP_AP_HEADER):
                header_seen = True
                continue
            raise MalformedHeader(
                f"expected airodump AP header, got line {line_no}: {stripped[:60]!r}")
        if not stripped:
            continue
        if stripped.startswith(_AIRODUMP_STATION_HEADER):
            break
        try:
            report.observations.append(
                _parse_airodump_row(line, line_no, scanner_id, effective_now))
        except SchemaViolation as exc:
            if strict:
                raise
            report.skipped += 1
            report.errors.append(exc)
            log.warning("skipping airodump line %d: %s", line_no, exc)
    if not header_seen:
        raise MalformedHeader("no airodump AP header found in input")
    return report


def _parse_airodump_row(line: str, line_no: int, scanner_id: str,
                        now: datetime) -> AccessPointObservation:
    columns = next(csv.reader([line], skipinitialspace=True))
    if len(columns) < _AIRODUMP_COLUMNS - 1:  # Key column may be absent
        raise SchemaViolation(
            f"expected {_AIRODUMP_COLUMNS} airodump columns, got {len(columns)}",
            line_no=line_no)
    (bssid_text, _first_seen, last_seen, channel_text, _speed, privacy,
     cipher, auth, power_text, *_rest) = columns
    essid = columns[13] if len(columns) > 13 else ""
    try:
        bssid = parse_bssid(bssid_text.strip())
    except (MalformedBssid, MulticastBssid) as exc:
        raise SchemaViolation(str(exc), field="bssid", line_no=line_no) from None
    observed_at = _airodump_time(last_seen, line_no)
    if now is not None and (observed_at - now).total_seconds() > 24 * 3600:
        raise SchemaViolation("observed_at more than 24h in the future",
                              field="observed_at", line_no=line_no)
    try:
        channel = int(channel_text.strip())
    except ValueError:
        raise SchemaViolation(f"invalid channel: {channel_text!r}",
                              field="channel", line_no=line_no) from None
    if channel < 0:
        channel = 0  # airodump reports -1 when undetermined
    try:
        rssi = int(power_text.strip())
    except ValueError:
        raise SchemaViolation(f"invalid power: {power_text!r}",
                              field="rssi_dbm", line_no=line_no) from None
    ssid_text = essid.strip()
    try:
        ssid = Ssid.from_text(ssid_text)
    except ValueError as exc:
        raise SchemaViolation(str(exc), field="ssid_b64", line_no=line_no) from None
    capabilities = _airodump_capabilities(privacy.strip(), cipher.strip(), auth.strip())
    try:
        return AccessPointObservation(
            bssid=bssid, ssid=ssid, capabilities=capabilities,
            channel=channel, frequency_mhz=0, rssi_dbm=rssi,
            observed_at=observed_at, scanner_id=scanner_id)
    except ValueError as exc:
        raise SchemaViolation(str(exc), line_no=line_no) from None
