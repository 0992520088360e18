"""Post-connection probes: DNS baselines, TLS pinning, captive-portal detection.

All network effects go through injected transports so check logic is testable
offline and never raises on hostile networks; transport failures become
verdicts, not exceptions.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import logging
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Collection, Mapping, Optional

from .errors import ConfigError, SchemaViolation
from .model import (
    Bssid,
    Flag,
    FlagLevel,
    MalformedBssid,
    MulticastBssid,
    format_rfc3339,
    parse_bssid,
    parse_rfc3339,
    utc_now,
)

log = logging.getLogger(__name__)

DEFAULT_PORTAL_URL = "http://connectivity.wificue.invalid/generate_204"
DEFAULT_PORTAL_STATUS = 204
DEFAULT_PORTAL_BODY = ""

Resolver = Callable[[str], Collection[str]]
TlsConnector = Callable[[str, int], str]  # returns base64 SPKI sha256 digest
HttpFetcher = Callable[[str], tuple[int, str]]


@dataclass(frozen=True)
class DnsBaselineEntry:
    domain: str
    expected: frozenset[str]

    def __post_init__(self):
        if not self.domain:
            raise ConfigError("baseline domain must be non-empty")
        if not self.expected:
            raise ConfigError(f"baseline for {self.domain!r} has no addresses")


@dataclass(frozen=True)
class DnsBaseline:
    entries: tuple[DnsBaselineEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ConfigError("DNS baseline must contain at least one entry")
        domains = [e.domain for e in self.entries]
        if len(set(domains)) != len(domains):
            raise ConfigError("DNS baseline has duplicate domains")


@dataclass(frozen=True)
class TlsPin:
    host: str
    port: int
    spki_sha256_b64: frozenset[str]

    def __post_init__(self):
        if not self.host:
            raise ConfigError("pin host must be non-empty")
        if not 0 < self.port < 65536:
            raise ConfigError(f"pin port out of range: {self.port}")
        if not self.spki_sha256_b64:
            raise ConfigError(f"pin for {self.host!r} has no digests")
        for digest in self.spki_sha256_b64:
            try:
                raw = base64.b64decode(digest, validate=True)
            except (ValueError, binascii.Error):
                raise ConfigError(f"pin digest is not base64: {digest!r}") from None
            if len(raw) != 32:
                raise ConfigError(f"pin digest must be 32 bytes: {digest!r}")

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"


@dataclass(frozen=True)
class TlsPinSet:
    entries: tuple[TlsPin, ...]

    def __post_init__(self):
        endpoints = [e.endpoint for e in self.entries]
        if len(set(endpoints)) != len(endpoints):
            raise ConfigError("TLS pin set has duplicate endpoints")


def load_dns_baseline(text: str) -> DnsBaseline:
    """Parse the operator DNS baseline file: {"domains": {name: [addrs...]}}."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"DNS baseline is not valid JSON: {exc.msg}") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("domains"), dict):
        raise ConfigError('DNS baseline must be {"domains": {...}}')
    entries = []
    for domain, addresses in payload["domains"].items():
        if (not isinstance(addresses, list)
                or not all(isinstance(a, str) and a for a in addresses)):
            raise ConfigError(f"addresses for {domain!r} must be non-empty strings")
        entries.append(DnsBaselineEntry(domain=domain,
                                        expected=frozenset(addresses)))
    return DnsBaseline(entries=tuple(entries))


def load_tls_pins(text: str) -> TlsPinSet:
    """Parse the operator TLS pin file: {"pins": [{host, port, spki_sha256}]}."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"TLS pin file is not valid JSON: {exc.msg}") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("pins"), list):
        raise ConfigError('TLS pin file must be {"pins": [...]}')
    entries = []
    for item in payload["pins"]:
        if not isinstance(item, dict):
            raise ConfigError("each pin must be an object")
        digests = item.get("spki_sha256")
        if isinstance(digests, str):
            digests = [digests]
        if not isinstance(digests, list):
            raise ConfigError("spki_sha256 must be a digest or list of digests")
        port = item.get("port", 443)
        if isinstance(port, bool) or not isinstance(port, int):
            raise ConfigError("pin port must be an integer")
        entries.append(TlsPin(host=item.get("host", ""), port=port,
                              spki_sha256_b64=frozenset(digests)))
    return TlsPinSet(entries=tuple(entries))


class DnsVerdict(Enum):
    MATCH = "MATCH"
    PARTIAL = "PARTIAL"
    MISMATCH = "MISMATCH"
    RESOLVE_FAILED = "RESOLVE_FAILED"


class TlsVerdict(Enum):
    PIN_OK = "PIN_OK"
    PIN_MISMATCH = "PIN_MISMATCH"
    CONNECT_FAILED = "CONNECT_FAILED"


class PortalVerdict(Enum):
    NO_PORTAL = "NO_PORTAL"
    PORTAL_DETECTED = "PORTAL_DETECTED"
    UNREACHABLE = "UNREACHABLE"


@dataclass(frozen=True)
class DnsCheck:
    verdict: DnsVerdict
    resolved: frozenset[str] = frozenset()


@dataclass(frozen=True)
class TlsCheck:
    verdict: TlsVerdict
    observed_spki: str = ""


@dataclass(frozen=True)
class PortalCheck:
    verdict: PortalVerdict
    status_code: Optional[int] = None


@dataclass(frozen=True)
class ProbeResult:
    """Everything one probe run learned about the network behind one AP."""

    bssid: Bssid
    started_at: datetime
    dns: Mapping[str, DnsCheck]
    tls: Mapping[str, TlsCheck]
    portal: PortalCheck


def check_dns(resolver: Resolver, baseline: DnsBaseline) -> dict[str, DnsCheck]:
    """Resolve each baseline domain and grade the answers.

    Subset of expected = MATCH; overlap = PARTIAL; disjoint = MISMATCH;
    resolver exceptions or empty answers = RESOLVE_FAILED.
    """
    checks: dict[str, DnsCheck] = {}
    for entry in baseline.entries:
        try:
            resolved = frozenset(str(a) for a in resolver(entry.domain))
        except Exception as exc:
            log.debug("resolve failed for %s: %s", entry.domain, exc)
            checks[entry.domain] = DnsCheck(DnsVerdict.RESOLVE_FAILED)
            continue
        if not resolved:
            checks[entry.domain] = DnsCheck(DnsVerdict.RESOLVE_FAILED)
        elif resolved <= entry.expected:
            checks[entry.domain] = DnsCheck(DnsVerdict.MATCH, resolved)
        elif resolved & entry.expected:
            checks[entry.domain] = DnsCheck(DnsVerdict.PARTIAL, resolved)
        else:
            checks[entry.domain] = DnsCheck(DnsVerdict.MISMATCH, resolved)
    return checks


def check_tls(connector: TlsConnector, pins: TlsPinSet) -> dict[str, TlsCheck]:
    """Connect to each pinned endpoint and compare the leaf SPKI digest."""
    checks: dict[str, TlsCheck] = {}
    for pin in pins.entries:
        try:
            observed = connector(pin.host, pin.port)
        except Exception as exc:
            log.debug("tls connect failed for %s: %s", pin.endpoint, exc)
            checks[pin.endpoint] = TlsCheck(TlsVerdict.CONNECT_FAILED)
            continue
        if observed in pin.spki_sha256_b64:
            checks[pin.endpoint] = TlsCheck(TlsVerdict.PIN_OK, observed)
        else:
            checks[pin.endpoint] = TlsCheck(TlsVerdict.PIN_MISMATCH, observed)
    return checks


def check_portal(fetcher: HttpFetcher, url: str = DEFAULT_PORTAL_URL,
                 expected_status: int = DEFAULT_PORTAL_STATUS,
                 expected_body: str = DEFAULT_PORTAL_BODY) -> PortalCheck:
    """Fetch a known-response URL; any deviation means a portal is interfering."""
    try:
        status, body = fetcher(url)
    except Exception as exc:
        log.debug("portal fetch failed: %s", exc)
        return PortalCheck(PortalVerdict.UNREACHABLE)
    if status == expected_status and body == expected_body:
        return PortalCheck(PortalVerdict.NO_PORTAL, status_code=status)
    return PortalCheck(PortalVerdict.PORTAL_DETECTED, status_code=status)


def run_probe(bssid: Bssid, baseline: DnsBaseline, pins: TlsPinSet, *,
              resolver: Resolver, connector: TlsConnector,
              fetcher: HttpFetcher, portal_url: str = DEFAULT_PORTAL_URL,
              expected_status: int = DEFAULT_PORTAL_STATUS,
              expected_body: str = DEFAULT_PORTAL_BODY,
              now: Optional[datetime] = None) -> ProbeResult:
    return ProbeResult(
        bssid=bssid,
        started_at=now or utc_now(),
        dns=check_dns(resolver, baseline),
        tls=check_tls(connector, pins),
        portal=check_portal(fetcher, portal_url, expected_status, expected_body),
    )


def probe_flags(result: ProbeResult) -> list[Flag]:
    """Derive flags from a probe run; triggers are independent of one another."""
    flags: list[Flag] = []
    mismatched = sorted(d for d, c in result.dns.items()
                        if c.verdict is DnsVerdict.MISMATCH)
    partial = sorted(d for d, c in result.dns.items()
                     if c.verdict is DnsVerdict.PARTIAL)
    pin_mismatched = sorted(e for e, c in result.tls.items()
                            if c.verdict is TlsVerdict.PIN_MISMATCH)
    if mismatched:
        flags.append(Flag(
            level=FlagLevel.CRITICAL_NEGATIVE, code="PROBE_DNS_TAMPER",
            message="DNS answers for baseline domains point somewhere else entirely",
            evidence={"domains": ",".join(mismatched)}))
    if pin_mismatched:
        flags.append(Flag(
            level=FlagLevel.CRITICAL_NEGATIVE, code="PROBE_TLS_TAMPER",
            message="TLS endpoints presented certificates that do not match their pins",
            evidence={"endpoints": ",".join(pin_mismatched)}))
    if result.portal.verdict is PortalVerdict.PORTAL_DETECTED:
        flags.append(Flag(
            level=FlagLevel.POTENTIAL_NEGATIVE, code="PROBE_PORTAL",
            message="a captive portal intercepted the connectivity check",
            evidence={"status_code": str(result.portal.status_code)}))
    if partial:
        flags.append(Flag(
            level=FlagLevel.POTENTIAL_NEGATIVE, code="PROBE_DNS_DRIFT",
            message="DNS answers only partially overlap the baseline",
            evidence={"domains": ",".join(partial)}))
    dns_all_failed = bool(result.dns) and all(
        c.verdict is DnsVerdict.RESOLVE_FAILED for c in result.dns.values())
    tls_all_failed = bool(result.tls) and all(
        c.verdict is TlsVerdict.CONNECT_FAILED for c in result.tls.values())
    if (dns_all_failed and tls_all_failed
            and result.portal.verdict is PortalVerdict.UNREACHABLE):
        flags.append(Flag(
            level=FlagLevel.NEGATIVE, code="PROBE_NO_INTERNET",
            message="no probe target was reachable; the network goes nowhere",
            evidence={"dns_failed": str(len(result.dns)),
                      "tls_failed": str(len(result.tls))}))
    return sorted(flags, key=lambda f: f.sort_key)


# ---- wire format for posted probe results ----------------------------------

def probe_result_to_dict(result: ProbeResult) -> dict[str, Any]:
    return {
        "bssid": str(result.bssid),
        "started_at": format_rfc3339(result.started_at),
        "dns": {domain: {"verdict": check.verdict.value,
                         "resolved": sorted(check.resolved)}
                for domain, check in result.dns.items()},
        "tls": {endpoint: {"verdict": check.verdict.value,
                           "observed_spki": check.observed_spki}
                for endpoint, check in result.tls.items()},
        "portal": {"verdict": result.portal.verdict.value,
                   "status_code": result.portal.status_code},
    }


def probe_result_from_dict(record: Any) -> ProbeResult:
    """Validate a posted probe result; raises SCHEMA_VIOLATION on bad shape."""
    if not isinstance(record, dict):
        raise SchemaViolation("probe result must be a JSON object")
    unknown = set(record) - {"bssid", "started_at", "dns", "tls", "portal"}
    if unknown:
        name = sorted(unknown)[0]
        raise SchemaViolation(f"unknown field {name!r}", field=name)
    for key in ("bssid", "started_at", "dns", "tls", "portal"):
        if key not in record:
            raise SchemaViolation(f"missing field {key!r}", field=key)
    if not isinstance(record["bssid"], str):
        raise SchemaViolation("bssid must be a string", field="bssid")
    try:
        bssid = parse_bssid(record["bssid"])
    except (MalformedBssid, MulticastBssid) as exc:
        raise SchemaViolation(str(exc), field="bssid") from None
    try:
        started_at = parse_rfc3339(record["started_at"])
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(str(exc), field="started_at") from None
    if not isinstance(record["dns"], dict) or not isinstance(record["tls"], dict):
        raise SchemaViolation("dns and tls must be objects", field="dns")
    dns: dict[str, DnsCheck] = {}
    for domain, item in record["dns"].items():
        if not isinstance(item, dict):
            raise SchemaViolation(f"dns entry {domain!r} must be an object",
                                  field="dns")
        try:
            verdict = DnsVerdict(item.get("verdict"))
        except ValueError:
            raise SchemaViolation(
                f"unknown dns verdict {item.get('verdict')!r}",
                field="dns") from None
        resolved = item.get("resolved", [])
        if not isinstance(resolved, list) or not all(isinstance(a, str) for a in resolved):
            raise SchemaViolation("resolved must be a list of strings", field="dns")
        dns[domain] = DnsCheck(verdict, frozenset(resolved))
    tls: dict[str, TlsCheck] = {}
    for endpoint, item in record["tls"].items():
        if not isinstance(item, dict):
            raise SchemaViolation(f"tls entry {endpoint!r} must be an object",
                                  field="tls")
        try:
            verdict = TlsVerdict(item.get("verdict"))
        except ValueError:
            raise SchemaViolation(
                f"unknown tls verdict {item.get('verdict')!r}",
                field="tls") from None
        observed = item.get("observed_spki", "")
        if not isinstance(observed, str):
            raise SchemaViolation("observed_spki must be a string", field="tls")
        tls[endpoint] = TlsCheck(verdict, observed)
    portal_record = record["portal"]
    if not isinstance(portal_record, dict):
        raise SchemaViolation("portal must be an object", field="portal")
    try:
        portal_verdict = PortalVerdict(portal_record.get("verdict"))
    except ValueError:
        raise SchemaViolation(
            f"unknown portal verdict {portal_record.get('verdict')!r}",
            field="portal") from None
    status_code = portal_record.get("status_code")
    if status_code is not None and (isinstance(status_code, bool)
                                    or not isinstance(status_code, int)):
        raise SchemaViolation("status_code must be an integer or null",
                              field="portal")
    return ProbeResult(bssid=bssid, started_at=started_at, dns=dns, tls=tls,
                       portal=PortalCheck(portal_verdict, status_code))


# ---- real transports for the CLI ------------------------------------------

def system_resolver(domain: str) -> list[str]:
    import socket

    infos = socket.getaddrinfo(domain, None, family=socket.AF_INET,
                               type=socket.SOCK_STREAM)
    return sorted({info[4][0] for info in infos})


def system_tls_connector(host: str, port: int, timeout: float = 10.0) -> str:
    """Fetch the leaf certificate and return its SPKI sha256, base64-encoded.

    Chain verification is intentionally off: the pin comparison is the
    authentication step, and a tampering middlebox should surface as
    PIN_MISMATCH rather than CONNECT_FAILED.
    """
    import socket
    import ssl

    from cryptography import x509
    from cryptography.hazmat.primitives import serialization

    context = ssl.create_default_context()
    context.check_hostname = False
    context.verify_mode = ssl.CERT_NONE
    with socket.create_connection((host, port), timeout=timeout) as sock:
        with context.wrap_socket(sock, server_hostname=host) as tls:
            der = tls.getpeercert(binary_form=True)
    certificate = x509.load_der_x509_certificate(der)
    spki = certificate.public_key().public_bytes(
        serialization.Encoding.DER,
        serialization.PublicFormat.SubjectPublicKeyInfo)
    return base64.b64encode(hashlib.sha256(spki).digest()).decode("ascii")


def system_http_fetcher(url: str, timeout: float = 10.0) -> tuple[int, str]:
    import requests

    # redirects are portal behaviour; report them, do not follow them
    response = requests.get(url, timeout=timeout, allow_redirects=False)
    return response.status_code, response.text
