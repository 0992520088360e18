"""Public-database enrichment: network detail lookup, caching, comparison.

Lookups run in one of two modes: LIVE (HTTP, basic auth) or FIXTURE (local
JSON files named ``<bssid-with-dashes>.json``). Successful lookups are cached
on disk for 24h so repeat assessments stay off the network.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional, Union

from .errors import (
    WigleAuthFailed,
    WigleMalformedResponse,
    WigleNetworkError,
    WigleQuotaExceeded,
)
from .model import (
    AccessPointObservation,
    Bssid,
    SecurityClass,
    classify_security,
    format_rfc3339,
    parse_bssid,
    parse_rfc3339,
    utc_now,
)

log = logging.getLogger(__name__)

API_URL = "https://api.wigle.net/api/v2/network/detail"
EARTH_RADIUS_KM = 6371.0
LOCATION_THRESHOLD_KM = 1.0
CACHE_TTL = timedelta(hours=24)

# transport(url, auth=(name, token), timeout) -> (status_code, body_text)
Transport = Callable[..., tuple[int, str]]


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float,
                 radius_km: float = EARTH_RADIUS_KM) -> float:
    """Great-circle distance between two points in kilometres."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlambda = math.radians(lon2 - lon1)
    a = (math.sin(dphi / 2.0) ** 2
         + math.cos(phi1) * math.cos(phi2) * math.sin(dlambda / 2.0) ** 2)
    return 2.0 * radius_km * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class WigleDetail:
    """What the public database knows about one BSSID."""

    netid: Bssid
    ssid: str
    encryption: str
    trilat: Optional[float] = None
    trilong: Optional[float] = None
    last_update: Optional[datetime] = None


class WigleStatus(Enum):
    UNKNOWN_TO_WIGLE = "UNKNOWN_TO_WIGLE"
    CONSISTENT = "CONSISTENT"
    SSID_MISMATCH = "SSID_MISMATCH"
    SECURITY_MISMATCH = "SECURITY_MISMATCH"
    LOCATION_MISMATCH = "LOCATION_MISMATCH"


@dataclass(frozen=True)
class WigleFinding:
    status: WigleStatus
    detail: Optional[WigleDetail] = None
    distance_km: Optional[float] = None


@dataclass(frozen=True)
class WigleUnavailable:
    """Lookup could not complete; carries the failure's error code."""

    error_code: str


def security_class_from_wigle(encryption: str) -> SecurityClass:
    """Map the database's encryption word through the capability grammar."""
    if not encryption:
        return SecurityClass.UNKNOWN
    klass, _ = classify_security(f"[{encryption.strip().upper()}]")
    return klass


def compare(detail: Optional[WigleDetail],
            obs: AccessPointObservation) -> WigleFinding:
    """Check an observation against database knowledge.

    Checks run in fixed order (ssid, security, location); the first failing
    check decides the status. Distance is reported whenever both sides have
    coordinates. Hidden or absent SSIDs on either side skip the SSID check;
    an unrecognizable encryption word skips the security check.
    """
    if detail is None:
        return WigleFinding(status=WigleStatus.UNKNOWN_TO_WIGLE)
    distance = None
    if (obs.location is not None and detail.trilat is not None
            and detail.trilong is not None):
        distance = haversine_km(obs.location.lat, obs.location.lon,
                                detail.trilat, detail.trilong)
    if detail.ssid and not obs.ssid.hidden and detail.ssid != obs.ssid.display:
        return WigleFinding(status=WigleStatus.SSID_MISMATCH, detail=detail,
                            distance_km=distance)
    known_class = security_class_from_wigle(detail.encryption)
    if (known_class is not SecurityClass.UNKNOWN
            and obs.security is not SecurityClass.UNKNOWN
            and known_class is not obs.security):
        return WigleFinding(status=WigleStatus.SECURITY_MISMATCH, detail=detail,
                            distance_km=distance)
    if distance is not None and distance > LOCATION_THRESHOLD_KM:
        return WigleFinding(status=WigleStatus.LOCATION_MISMATCH, detail=detail,
                            distance_km=distance)
    return WigleFinding(status=WigleStatus.CONSISTENT, detail=detail,
                        distance_km=distance)


def _parse_last_update(value: Any) -> Optional[datetime]:
    if not isinstance(value, str) or not value:
        return None
    try:
        return parse_rfc3339(value)
    except ValueError:
        pass
    try:
        return parse_rfc3339(value + "Z")
    except ValueError:
        return None


def parse_detail_body(body: str) -> Optional[WigleDetail]:
    """Parse a network/detail response body; None means 'not in database'."""
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as exc:
        raise WigleMalformedResponse(f"invalid JSON from lookup: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise WigleMalformedResponse("lookup response must be a JSON object")
    results = payload.get("results")
    if results in (None, []):
        return None
    if not isinstance(results, list) or not isinstance(results[0], dict):
        raise WigleMalformedResponse("lookup results must be a list of objects")
    first = results[0]
    netid_text = first.get("netid")
    if not isinstance(netid_text, str):
        raise WigleMalformedResponse("lookup result missing netid")
    try:
        netid = parse_bssid(netid_text)
    except Exception:
        raise WigleMalformedResponse(f"unparseable netid {netid_text!r}") from None

    def number_or_none(key: str) -> Optional[float]:
        value = first.get(key)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise WigleMalformedResponse(f"field {key!r} must be a number")
        return float(value)

    ssid = first.get("ssid")
    encryption = first.get("encryption")
    return WigleDetail(
        netid=netid,
        ssid=ssid if isinstance(ssid, str) else "",
        encryption=encryption if isinstance(encryption, str) else "",
        trilat=number_or_none("trilat"),
        trilong=number_or_none("trilong"),
        last_update=_parse_last_update(first.get("lastupdt")),
    )


def default_transport(url: str, *, auth: tuple[str, str],
                      timeout: float = 15.0) -> tuple[int, str]:
    import requests

    try:
        response = requests.get(url, auth=auth, timeout=timeout,
                                headers={"Accept": "application/json"})
    except requests.RequestException as exc:
        raise WigleNetworkError(f"lookup request failed: {exc}") from None
    return response.status_code, response.text


class _NoCache:
    """Sentinel distinguishing 'no usable cache entry' from a cached None."""

    __slots__ = ()


NO_CACHE = _NoCache()


class WigleClient:
    """Cached network-detail lookups in LIVE or FIXTURE mode."""

    def __init__(self, *, fixtures_dir: Optional[Union[str, Path]] = None,
                 api_name: Optional[str] = None,
                 api_token: Optional[str] = None,
                 cache_dir: Optional[Union[str, Path]] = None,
                 ttl: timedelta = CACHE_TTL,
                 transport: Optional[Transport] = None,
                 clock: Callable[[], datetime] = utc_now):
        if fixtures_dir is None and not (api_name and api_token):
            raise ValueError("need fixtures_dir or api credentials")
        self._fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self._auth = (api_name or "", api_token or "")
        self._cache_dir = Path(cache_dir) if cache_dir else None
        self._ttl = ttl
        self._transport = transport or default_transport
        self._clock = clock
        self._locks: dict[Bssid, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.transport_calls = 0
        if self._cache_dir:
            self._cache_dir.mkdir(parents=True, exist_ok=True)

    @classmethod
    def fixture(cls, fixtures_dir: Union[str, Path], **kwargs) -> "WigleClient":
        return cls(fixtures_dir=fixtures_dir, **kwargs)

    @classmethod
    def live(cls, api_name: str, api_token: str, **kwargs) -> "WigleClient":
        return cls(api_name=api_name, api_token=api_token, **kwargs)

    def _lock_for(self, bssid: Bssid) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(bssid, threading.Lock())

    def _cache_path(self, bssid: Bssid) -> Optional[Path]:
        if self._cache_dir is None:
            return None
        return self._cache_dir / (str(bssid).replace(":", "-") + ".json")

    def _cache_write(self, bssid: Bssid, found: bool, body: str) -> None:
        path = self._cache_path(bssid)
        if path is None:
            return
        entry = {"fetched_at": format_rfc3339(self._clock()),
                 "found": found, "body": body}
        try:
            path.write_text(json.dumps(entry), encoding="utf-8")
        except OSError as exc:  # cache failures must not break lookups
            log.warning("cannot write lookup cache %s: %s", path, exc)

    def lookup(self, bssid: Bssid) -> Optional[WigleDetail]:
        """Fetch detail for a BSSID; None means the database has no record.

        Raises AUTH_FAILED / QUOTA_EXCEEDED / NETWORK_ERROR /
        MALFORMED_RESPONSE on failure. Results younger than the TTL are
        served from cache without touching the transport.
        """
        with self._lock_for(bssid):
            cache_path = self._cache_path(bssid)
            if cache_path is not None and cache_path.exists():
                cached = self._read_cache_entry(cache_path)
                if cached is not NO_CACHE:
                    return cached
            if self._fixtures_dir is not None:
                found, body = self._fixture_fetch(bssid)
            else:
                found, body = self._live_fetch(bssid)
            detail = parse_detail_body(body) if found else None
            self._cache_write(bssid, found, body)
            return detail

    def _read_cache_entry(self, path: Path):
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            fetched_at = parse_rfc3339(entry["fetched_at"])
        except (OSError, ValueError, KeyError, json.JSONDecodeError):
            return NO_CACHE
        if self._clock() - fetched_at >= self._ttl:
            return NO_CACHE
        if not entry.get("found"):
            return None
        try:
            return parse_detail_body(entry["body"])
        except WigleMalformedResponse:
            return NO_CACHE

    def _fixture_fetch(self, bssid: Bssid) -> tuple[bool, str]:
        assert self._fixtures_dir is not None
        path = self._fixtures_dir / (str(bssid).replace(":", "-") + ".json")
        if not path.exists():
            return False, ""
        try:
            return True, path.read_text(encoding="utf-8")
        except OSError as exc:
            raise WigleNetworkError(f"cannot read fixture {path}: {exc}") from None

    def _live_fetch(self, bssid: Bssid) -> tuple[bool, str]:
        url = f"{API_URL}?netid={bssid}"
        self.transport_calls += 1
        status, body = self._transport(url, auth=self._auth)
        if status in (401, 403):
            raise WigleAuthFailed(f"lookup auth rejected (HTTP {status})")
        if status == 429:
            raise WigleQuotaExceeded("lookup quota exceeded (HTTP 429)")
        if status == 404:
            return False, ""
        if status != 200:
            raise WigleNetworkError(f"lookup failed with HTTP {status}")
        if parse_detail_body(body) is None:
            return False, body
        return True, body
