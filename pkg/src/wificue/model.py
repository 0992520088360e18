"""Core domain types: identifiers, security classification, flags, observations.

Everything downstream (ingest, rules, scoring, the API) builds on the types in
this module. Values are immutable; the wire format is line-delimited JSON with
a fixed field set and RFC3339 UTC timestamps at second precision.
"""

from __future__ import annotations

import base64
import binascii
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum, IntEnum
from typing import Any, Optional

from .errors import MalformedBssid, MulticastBssid, SchemaViolation

_BSSID_RE = re.compile(r"^[0-9A-Fa-f]{2}([:-][0-9A-Fa-f]{2}){5}$")

SSID_MAX_OCTETS = 32
RSSI_MIN = -120
RSSI_MAX = 0
MAX_FUTURE_SKEW = timedelta(hours=24)


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC3339 timestamp into an aware UTC datetime (whole seconds).

    Accepts 'Z' or a numeric offset; naive timestamps are rejected.
    """
    if not isinstance(text, str):
        raise ValueError("timestamp must be a string")
    candidate = text.strip()
    if candidate.endswith(("Z", "z")):
        candidate = candidate[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(candidate)
    except ValueError:
        raise ValueError(f"invalid RFC3339 timestamp: {text!r}") from None
    if parsed.tzinfo is None:
        raise ValueError(f"timestamp missing timezone: {text!r}")
    return parsed.astimezone(timezone.utc).replace(microsecond=0)


def format_rfc3339(moment: datetime) -> str:
    """Render an aware datetime as RFC3339 UTC with 'Z' suffix, whole seconds."""
    if moment.tzinfo is None:
        raise ValueError("naive datetime cannot be formatted as RFC3339 UTC")
    return moment.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True, order=True)
class Bssid:
    """A validated unicast BSSID; canonical form is lowercase colon-hex."""

    octets: bytes

    def __post_init__(self):
        if not isinstance(self.octets, bytes) or len(self.octets) != 6:
            raise MalformedBssid("BSSID must be exactly 6 octets")
        if self.octets[0] & 0x01:
            raise MulticastBssid(
                f"multicast bit set in {self.octets.hex()}; not a station address"
            )

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    @property
    def oui_prefix(self) -> str:
        """First three octets in canonical text form, e.g. 'a8:bb:cc'."""
        return str(self)[:8]

    @property
    def locally_administered(self) -> bool:
        return bool(self.octets[0] & 0x02)


def parse_bssid(text: str) -> Bssid:
    """Parse colon- or dash-separated hex into a Bssid.

    Raises MalformedBssid for bad shape, MulticastBssid for group addresses.
    """
    if not isinstance(text, str) or not _BSSID_RE.match(text or ""):
        raise MalformedBssid(f"not a valid BSSID: {text!r}")
    try:
        octets = bytes.fromhex(text.replace(":", "").replace("-", ""))
    except (ValueError, binascii.Error):  # pragma: no cover - regex guards this
        raise MalformedBssid(f"not a valid BSSID: {text!r}") from None
    return Bssid(octets)


@dataclass(frozen=True)
class Ssid:
    """An SSID as raw octets (0..32); display form replaces invalid UTF-8."""

    data: bytes = b""

    def __post_init__(self):
        if not isinstance(self.data, bytes):
            raise ValueError("SSID payload must be bytes")
        if len(self.data) > SSID_MAX_OCTETS:
            raise ValueError(f"SSID longer than {SSID_MAX_OCTETS} octets")

    @classmethod
    def from_text(cls, text: str) -> "Ssid":
        return cls(text.encode("utf-8"))

    @classmethod
    def from_b64(cls, encoded: str) -> "Ssid":
        try:
            raw = base64.b64decode(encoded, validate=True)
        except (ValueError, binascii.Error):
            raise ValueError(f"invalid base64 SSID: {encoded!r}") from None
        return cls(raw)

    @property
    def b64(self) -> str:
        return base64.b64encode(self.data).decode("ascii")

    @property
    def display(self) -> str:
        return self.data.decode("utf-8", errors="replace")

    @property
    def hidden(self) -> bool:
        """True for zero-length SSIDs; hidden networks never match by name."""
        return len(self.data) == 0


class SecurityClass(Enum):
    """Security configuration classes, as advertised in scan capability strings."""

    OPEN = "OPEN"
    OWE = "OWE"
    WEP = "WEP"
    WPA_TKIP = "WPA_TKIP"
    WPA2_PSK = "WPA2_PSK"
    WPA2_ENTERPRISE = "WPA2_ENTERPRISE"
    WPA3_SAE = "WPA3_SAE"
    WPA3_ENTERPRISE = "WPA3_ENTERPRISE"
    UNKNOWN = "UNKNOWN"


_TOKEN_RE = re.compile(r"\[([^\[\]]*)\]")

# Ordered prefix table: first matching prefix classifies the token, so the
# WPA3-/WPA2- forms must precede the bare SAE and WPA- prefixes.
_SECURITY_TOKEN_PREFIXES: tuple[tuple[str, SecurityClass], ...] = (
    ("WPA3-SAE", SecurityClass.WPA3_SAE),
    ("WPA3-EAP", SecurityClass.WPA3_ENTERPRISE),
    ("WPA2-PSK", SecurityClass.WPA2_PSK),
    ("WPA2-EAP", SecurityClass.WPA2_ENTERPRISE),
    ("WPA-", SecurityClass.WPA_TKIP),
    ("WEP", SecurityClass.WEP),
    ("SAE", SecurityClass.WPA3_SAE),
    ("OWE", SecurityClass.OWE),
)

# Non-security tokens that still mark a capability string as recognizable.
_STRUCTURAL_TOKENS = frozenset({"ESS", "IBSS", "WPS"})

# Strongest advertisement wins when several security tokens are present.
_CLASS_STRENGTH = {
    SecurityClass.WPA3_ENTERPRISE: 8,
    SecurityClass.WPA3_SAE: 7,
    SecurityClass.WPA2_ENTERPRISE: 6,
    SecurityClass.WPA2_PSK: 5,
    SecurityClass.WPA_TKIP: 4,
    SecurityClass.WEP: 3,
    SecurityClass.OWE: 2,
    SecurityClass.OPEN: 1,
    SecurityClass.UNKNOWN: 0,
}


def classify_security(capabilities: str) -> tuple[SecurityClass, bool]:
    """Classify a capability string; returns (security class, wps_advertised).

    No recognized token at all yields UNKNOWN; recognized tokens without any
    security token yield OPEN. The strongest advertised class wins.
    """
    wps_advertised = False
    best: Optional[SecurityClass] = None
    recognized = False
    for match in _TOKEN_RE.finditer(capabilities or ""):
        token = match.group(1).strip().upper()
        if token == "WPS":
            wps_advertised = True
            recognized = True
            continue
        if token in _STRUCTURAL_TOKENS:
            recognized = True
            continue
        for prefix, klass in _SECURITY_TOKEN_PREFIXES:
            if token.startswith(prefix):
                recognized = True
                if best is None or _CLASS_STRENGTH[klass] > _CLASS_STRENGTH[best]:
                    best = klass
                break
    if best is not None:
        return best, wps_advertised
    if recognized:
        return SecurityClass.OPEN, wps_advertised
    return SecurityClass.UNKNOWN, wps_advertised


class FlagLevel(IntEnum):
    """Finding severity; numerically higher is more severe."""

    UNDETERMINED = 0
    POTENTIAL_NEGATIVE = 1
    NEGATIVE = 2
    CRITICAL_NEGATIVE = 3


# The stable public vocabulary of rule codes; exactly these appear in output.
FLAG_CODES = frozenset({
    "SEC_WEP", "SEC_OPEN", "SEC_WPA_TKIP", "SEC_WPA2_PSK",
    "SEC_WPA2_ENTERPRISE", "SEC_WPA3_SAE", "SEC_WPA3_ENTERPRISE",
    "SEC_OWE", "SEC_UNKNOWN", "SEC_WPS",
    "ID_DENYLISTED_OUI", "ID_RANDOM_MAC", "ID_UNKNOWN_VENDOR",
    "TWIN_SECURITY_MISMATCH", "TWIN_NEW_WEAKER", "TWIN_SSID_COLLISION",
    "HIST_SECURITY_CHANGED", "HIST_SSID_CHANGED", "HIST_CHANNEL_CHANGED",
    "WIGLE_UNKNOWN", "WIGLE_CHANGED", "WIGLE_LOCATION", "WIGLE_UNAVAILABLE",
    "PROBE_DNS_TAMPER", "PROBE_TLS_TAMPER", "PROBE_PORTAL",
    "PROBE_NO_INTERNET", "PROBE_DNS_DRIFT",
})


@dataclass(frozen=True, eq=True)
class Flag:
    """One finding about one access point, with human and machine evidence."""

    level: FlagLevel
    code: str
    message: str
    evidence: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.code not in FLAG_CODES:
            raise ValueError(f"unregistered flag code: {self.code!r}")
        if not self.message:
            raise ValueError("flag message must be non-empty")

    @property
    def sort_key(self) -> tuple[int, str]:
        """Most severe first, then code for a total deterministic order."""
        return (-int(self.level), self.code)


@dataclass(frozen=True)
class Location:
    lat: float
    lon: float
    accuracy_m: Optional[float] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if self.accuracy_m is not None and self.accuracy_m < 0:
            raise ValueError(f"accuracy must be non-negative: {self.accuracy_m}")


@dataclass(frozen=True)
class AccessPointObservation:
    """One sighting of one access point by one scanner at one moment.

    ``security`` and ``wps_advertised`` are derived from ``capabilities`` at
    construction and cannot disagree with it.
    """

    bssid: Bssid
    ssid: Ssid
    capabilities: str
    channel: int
    frequency_mhz: int
    rssi_dbm: int
    observed_at: datetime
    scanner_id: str
    location: Optional[Location] = None
    security: SecurityClass = field(init=False)
    wps_advertised: bool = field(init=False)

    def __post_init__(self):
        if not isinstance(self.channel, int) or isinstance(self.channel, bool) or self.channel < 0:
            raise ValueError(f"channel must be a non-negative integer: {self.channel!r}")
        if not isinstance(self.frequency_mhz, int) or isinstance(self.frequency_mhz, bool) or self.frequency_mhz < 0:
            raise ValueError(f"frequency_mhz must be a non-negative integer: {self.frequency_mhz!r}")
        if not isinstance(self.rssi_dbm, int) or isinstance(self.rssi_dbm, bool):
            raise ValueError(f"rssi_dbm must be an integer: {self.rssi_dbm!r}")
        if not RSSI_MIN <= self.rssi_dbm <= RSSI_MAX:
            raise ValueError(f"rssi_dbm out of range [{RSSI_MIN}, {RSSI_MAX}]: {self.rssi_dbm}")
        if self.observed_at.tzinfo is None:
            raise ValueError("observed_at must be timezone-aware")
        if not self.scanner_id or not isinstance(self.scanner_id, str):
            raise ValueError("scanner_id must be a non-empty string")
        object.__setattr__(self, "observed_at",
                           self.observed_at.astimezone(timezone.utc).replace(microsecond=0))
        sec, wps = classify_security(self.capabilities)
        object.__setattr__(self, "security", sec)
        object.__setattr__(self, "wps_advertised", wps)


# Wire field order is fixed; extra keys are rejected on decode.
_WIRE_REQUIRED = ("observed_at", "scanner_id", "bssid", "ssid_b64",
                  "capabilities", "channel", "frequency_mhz", "rssi_dbm")
_WIRE_OPTIONAL = ("lat", "lon", "accuracy_m")
_WIRE_FIELDS = frozenset(_WIRE_REQUIRED + _WIRE_OPTIONAL)


def _require_int(record: dict[str, Any], key: str, line_no: Optional[int]) -> int:
    value = record[key]
    # bool is an int subclass; the wire format does not allow it here
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation(f"field {key!r} must be an integer",
                              field=key, line_no=line_no)
    return value


def _require_number(value: Any, key: str, line_no: Optional[int]) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"field {key!r} must be a number",
                              field=key, line_no=line_no)
    return float(value)


def observation_to_dict(obs: AccessPointObservation) -> dict[str, Any]:
    """Render an observation as a wire dict in canonical field order."""
    record: dict[str, Any] = {
        "observed_at": format_rfc3339(obs.observed_at),
        "scanner_id": obs.scanner_id,
        "bssid": str(obs.bssid),
        "ssid_b64": obs.ssid.b64,
        "capabilities": obs.capabilities,
        "channel": obs.channel,
        "frequency_mhz": obs.frequency_mhz,
        "rssi_dbm": obs.rssi_dbm,
    }
    if obs.location is not None:
        record["lat"] = obs.location.lat
        record["lon"] = obs.location.lon
        if obs.location.accuracy_m is not None:
            record["accuracy_m"] = obs.location.accuracy_m
    return record


def observation_from_dict(record: Any, *, line_no: Optional[int] = None,
                          now: Optional[datetime] = None) -> AccessPointObservation:
    """Validate a wire dict into an observation.

    Raises SchemaViolation naming the offending field (and line when known).
    When ``now`` is given, timestamps more than 24h past it are rejected;
    pass None when re-reading already-ingested data.
    """
    if not isinstance(record, dict):
        raise SchemaViolation("record must be a JSON object", line_no=line_no)
    unknown = set(record) - _WIRE_FIELDS
    if unknown:
        name = sorted(unknown)[0]
        raise SchemaViolation(f"unknown field {name!r}", field=name, line_no=line_no)
    missing = [k for k in _WIRE_REQUIRED if k not in record]
    if missing:
        raise SchemaViolation(f"missing field {missing[0]!r}",
                              field=missing[0], line_no=line_no)
    for key in ("observed_at", "scanner_id", "bssid", "ssid_b64", "capabilities"):
        if not isinstance(record[key], str):
            raise SchemaViolation(f"field {key!r} must be a string",
                                  field=key, line_no=line_no)
    try:
        observed_at = parse_rfc3339(record["observed_at"])
    except ValueError as exc:
        raise SchemaViolation(str(exc), field="observed_at", line_no=line_no) from None
    if now is not None and observed_at - now > MAX_FUTURE_SKEW:
        raise SchemaViolation(
            f"observed_at more than 24h in the future: {record['observed_at']}",
            field="observed_at", line_no=line_no)
    try:
        bssid = parse_bssid(record["bssid"])
    except (MalformedBssid, MulticastBssid) as exc:
        raise SchemaViolation(str(exc), field="bssid", line_no=line_no) from None
    try:
        ssid = Ssid.from_b64(record["ssid_b64"])
    except ValueError as exc:
        raise SchemaViolation(str(exc), field="ssid_b64", line_no=line_no) from None

    channel = _require_int(record, "channel", line_no)
    frequency_mhz = _require_int(record, "frequency_mhz", line_no)
    rssi_dbm = _require_int(record, "rssi_dbm", line_no)

    location = None
    has_lat, has_lon = "lat" in record, "lon" in record
    if has_lat != has_lon:
        bad = "lon" if has_lat else "lat"
        raise SchemaViolation("lat and lon must appear together",
                              field=bad, line_no=line_no)
    if "accuracy_m" in record and not has_lat:
        raise SchemaViolation("accuracy_m requires lat and lon",
                              field="accuracy_m", line_no=line_no)
    if has_lat:
        lat = _require_number(record["lat"], "lat", line_no)
        lon = _require_number(record["lon"], "lon", line_no)
        accuracy = None
        if "accuracy_m" in record:
            accuracy = _require_number(record["accuracy_m"], "accuracy_m", line_no)
        try:
            location = Location(lat, lon, accuracy)
        except ValueError as exc:
            raise SchemaViolation(str(exc), field="lat", line_no=line_no) from None

    if not record["scanner_id"]:
        raise SchemaViolation("scanner_id must be non-empty",
                              field="scanner_id", line_no=line_no)
    try:
        return AccessPointObservation(
            bssid=bssid, ssid=ssid, capabilities=record["capabilities"],
            channel=channel, frequency_mhz=frequency_mhz, rssi_dbm=rssi_dbm,
            observed_at=observed_at, scanner_id=record["scanner_id"],
            location=location)
    except ValueError as exc:
        msg = str(exc)
        culprit = next((k for k in ("rssi_dbm", "channel", "frequency_mhz")
                        if k in msg), None)
        raise SchemaViolation(msg, field=culprit, line_no=line_no) from None


def encode_observation(obs: AccessPointObservation) -> str:
    """One canonical JSON line (no trailing newline)."""
    return json.dumps(observation_to_dict(obs), separators=(",", ":"),
                      ensure_ascii=True)


def decode_observation(line: str, *, line_no: Optional[int] = None,
                       now: Optional[datetime] = None) -> AccessPointObservation:
    """Parse one canonical JSON line; inverse of encode_observation."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"invalid JSON: {exc.msg}", line_no=line_no) from None
    return observation_from_dict(record, line_no=line_no, now=now)
