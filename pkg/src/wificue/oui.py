"""Vendor registry: manuf-format parsing, longest-prefix lookup, identifiability.

The registry file uses the wireshark `manuf` layout: a hex prefix (24-bit
default, /28 and /36 masks supported), a tab, a short vendor name, and an
optional long name. Lines whose first non-blank character is '#' are comments.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Optional

from .errors import EmptyBatch, EmptyRegistry, MalformedLine
from .ingest import ScanBatch
from .model import Bssid, utc_now

log = logging.getLogger(__name__)

_PREFIX_RE = re.compile(
    r"^([0-9A-Fa-f]{2}(?:[:-][0-9A-Fa-f]{2}){2,5})(?:/(\d{1,2}))?$")
_VALID_MASKS = (24, 28, 36)


@dataclass(frozen=True)
class VendorMatch:
    """Lookup outcome; ``matched`` False means the registry has no entry."""

    matched: bool
    prefix_len: int = 0
    short_name: str = ""
    long_name: str = ""


UNMATCHED = VendorMatch(matched=False)


def is_locally_administered(bssid: Bssid) -> bool:
    """True when the U/L bit is set; such addresses are typically randomized
    client MACs and carry no vendor identity."""
    return bool(bssid.octets[0] & 0x02)


@dataclass
class OuiRegistry:
    """In-memory prefix tables keyed by mask length; longest prefix wins."""

    source_version: str
    loaded_at: datetime
    skipped: int = 0
    _tables: dict[int, dict[int, tuple[str, str]]] = field(
        default_factory=lambda: {bits: {} for bits in _VALID_MASKS})

    def __len__(self) -> int:
        return sum(len(t) for t in self._tables.values())

    def add(self, prefix_bits: int, key: int, short_name: str, long_name: str,
            *, line_no: Optional[int] = None) -> None:
        table = self._tables[prefix_bits]
        if key in table:
            raise MalformedLine(
                f"duplicate /{prefix_bits} prefix {key:0{prefix_bits // 4}x}",
                line_no=line_no)
        table[key] = (short_name, long_name)

    def lookup(self, bssid: Bssid) -> VendorMatch:
        value = int.from_bytes(bssid.octets, "big")
        for bits in sorted(_VALID_MASKS, reverse=True):
            hit = self._tables[bits].get(value >> (48 - bits))
            if hit is not None:
                return VendorMatch(True, bits, hit[0], hit[1])
        return UNMATCHED


def _parse_prefix(text: str, line_no: int) -> tuple[int, int]:
    """Turn 'aa:bb:cc[:..][/mask]' into (mask_bits, prefix_key)."""
    match = _PREFIX_RE.match(text.strip())
    if not match:
        raise MalformedLine(f"invalid registry prefix: {text!r}", line_no=line_no)
    raw, mask_text = match.groups()
    mask = int(mask_text) if mask_text else 24
    if mask not in _VALID_MASKS:
        raise MalformedLine(f"unsupported prefix mask /{mask}", line_no=line_no)
    octets = bytes.fromhex(raw.replace(":", "").replace("-", ""))
    needed = (mask + 7) // 8
    if len(octets) < needed:
        raise MalformedLine(
            f"prefix {text!r} too short for /{mask}", line_no=line_no)
    padded = octets.ljust(6, b"\x00")
    key = int.from_bytes(padded, "big") >> (48 - mask)
    return mask, key


def load_registry(lines: Iterable[str], *, strict: bool = True,
                  source_version: Optional[str] = None) -> OuiRegistry:
    """Parse manuf-format lines into a registry.

    Strict mode raises MALFORMED_LINE on the first bad or duplicate line;
    lenient mode skips and counts them. Zero entries raise EMPTY_REGISTRY.
    """
    collected = list(lines)
    if source_version is None:
        digest = hashlib.sha256("\n".join(collected).encode("utf-8"))
        source_version = digest.hexdigest()[:12]
    registry = OuiRegistry(source_version=source_version, loaded_at=utc_now())
    for line_no, raw in enumerate(collected, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        fields = [f for f in fields if f]
        try:
            if len(fields) < 2:
                raise MalformedLine(
                    "registry line needs a prefix and a short name",
                    line_no=line_no)
            mask, key = _parse_prefix(fields[0], line_no)
            short_name = fields[1]
            long_name = fields[2] if len(fields) > 2 else ""
            registry.add(mask, key, short_name, long_name, line_no=line_no)
        except MalformedLine as exc:
            if strict:
                raise
            registry.skipped += 1
            log.warning("skipping registry line %d: %s", line_no, exc)
    if len(registry) == 0:
        raise EmptyRegistry("registry contains no usable entries")
    return registry


def load_registry_file(path, *, strict: bool = True) -> OuiRegistry:
    with open(path, "r", encoding="utf-8", errors="replace") as handle:
        content = handle.read()
    version = hashlib.sha256(content.encode("utf-8")).hexdigest()[:12]
    return load_registry(content.splitlines(), strict=strict,
                         source_version=version)


def identifiability_rate(registry: OuiRegistry, batch: ScanBatch) -> float:
    """Fraction of the batch's access points with a vendor match in [0, 1]."""
    if not batch.observations:
        raise EmptyBatch("cannot compute identifiability of an empty batch")
    matched = sum(1 for obs in batch.observations
                  if registry.lookup(obs.bssid).matched)
    return matched / len(batch.observations)
