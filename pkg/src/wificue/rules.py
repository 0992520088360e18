"""Rule engine: turns observations plus context into per-AP flag sets.

Rules are pure functions over immutable inputs. Each produces flags with
stable codes; the combined set is deduplicated by code (highest level wins)
and sorted most-severe-first for deterministic output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import AbstractSet, Iterator, Mapping, Optional, Union

from .history import ApHistory, Deviation, DeviationKind, detect_deviations
from .ingest import ScanBatch
from .model import (
    AccessPointObservation,
    Bssid,
    Flag,
    FlagLevel,
    SecurityClass,
)
from .oui import OuiRegistry, is_locally_administered
from .probe import ProbeResult, probe_flags
from .wigle import WigleFinding, WigleStatus, WigleUnavailable


@dataclass(frozen=True)
class _ProtocolRule:
    code: str
    level: FlagLevel
    message: str


# Severity of each advertised security class, and the flag announcing it.
PROTOCOL_RULES: Mapping[SecurityClass, _ProtocolRule] = {
    SecurityClass.WEP: _ProtocolRule(
        "SEC_WEP", FlagLevel.CRITICAL_NEGATIVE,
        "WEP is broken and was retired from certification years ago"),
    SecurityClass.OPEN: _ProtocolRule(
        "SEC_OPEN", FlagLevel.NEGATIVE,
        "open network: all traffic is visible to anyone in range"),
    SecurityClass.WPA_TKIP: _ProtocolRule(
        "SEC_WPA_TKIP", FlagLevel.NEGATIVE,
        "first-generation WPA with TKIP has known practical attacks"),
    SecurityClass.WPA2_PSK: _ProtocolRule(
        "SEC_WPA2_PSK", FlagLevel.POTENTIAL_NEGATIVE,
        "WPA2 pre-shared key: offline brute force is possible if the "
        "handshake is captured"),
    SecurityClass.WPA2_ENTERPRISE: _ProtocolRule(
        "SEC_WPA2_ENTERPRISE", FlagLevel.POTENTIAL_NEGATIVE,
        "WPA2 enterprise: safety depends on clients validating the "
        "authentication server"),
    SecurityClass.WPA3_SAE: _ProtocolRule(
        "SEC_WPA3_SAE", FlagLevel.POTENTIAL_NEGATIVE,
        "WPA3 personal: current, though early handshake weaknesses "
        "were found"),
    SecurityClass.WPA3_ENTERPRISE: _ProtocolRule(
        "SEC_WPA3_ENTERPRISE", FlagLevel.UNDETERMINED,
        "WPA3 enterprise advertised; no known protocol-level concern"),
    SecurityClass.OWE: _ProtocolRule(
        "SEC_OWE", FlagLevel.UNDETERMINED,
        "opportunistic wireless encryption advertised; no known "
        "protocol-level concern"),
    SecurityClass.UNKNOWN: _ProtocolRule(
        "SEC_UNKNOWN", FlagLevel.UNDETERMINED,
        "capability string not recognized; security class undetermined"),
}

WPS_RULE = _ProtocolRule(
    "SEC_WPS", FlagLevel.NEGATIVE,
    "WPS advertised: PIN registration is brute-forceable")

# How many prior sightings make a BSSID the established carrier of an SSID.
ESTABLISHED_SIGHTINGS = 3


def protocol_severity(security: SecurityClass) -> FlagLevel:
    return PROTOCOL_RULES[security].level


@dataclass(frozen=True)
class ApFlagSet:
    """Deduplicated, sorted flags for one access point."""

    bssid: Bssid
    flags: tuple[Flag, ...]

    def __iter__(self) -> Iterator[Flag]:
        return iter(self.flags)

    @classmethod
    def from_flags(cls, bssid: Bssid, flags: list[Flag]) -> "ApFlagSet":
        # same code from two rules keeps the more severe finding
        by_code: dict[str, Flag] = {}
        for flag in flags:
            kept = by_code.get(flag.code)
            if kept is None or flag.level > kept.level:
                by_code[flag.code] = flag
        ordered = sorted(by_code.values(), key=lambda f: f.sort_key)
        return cls(bssid=bssid, flags=tuple(ordered))

    @property
    def max_level(self) -> FlagLevel:
        return max((f.level for f in self.flags), default=FlagLevel.UNDETERMINED)


@dataclass(frozen=True)
class RuleContext:
    """Everything the rules may consult for one assessment run.

    ``histories`` must cover the batch's BSSIDs plus any BSSID that has
    carried one of the batch's SSIDs; optional inputs may be None/absent.
    """

    batch: ScanBatch
    registry: Optional[OuiRegistry] = None
    histories: Mapping[Bssid, ApHistory] = field(default_factory=dict)
    wigle: Optional[Mapping[Bssid, Union[WigleFinding, WigleUnavailable]]] = None
    probes: Mapping[Bssid, ProbeResult] = field(default_factory=dict)
    deny_list: AbstractSet[str] = frozenset()


def protocol_flags(obs: AccessPointObservation) -> list[Flag]:
    rule = PROTOCOL_RULES[obs.security]
    flags = [Flag(level=rule.level, code=rule.code, message=rule.message,
                  evidence={"security": obs.security.value,
                            "capabilities": obs.capabilities})]
    if obs.wps_advertised:
        flags.append(Flag(level=WPS_RULE.level, code=WPS_RULE.code,
                          message=WPS_RULE.message,
                          evidence={"capabilities": obs.capabilities}))
    return flags


def identity_flags(obs: AccessPointObservation,
                   registry: Optional[OuiRegistry],
                   deny_list: AbstractSet[str]) -> list[Flag]:
    """Vendor-identity checks: deny list, randomized MAC, unknown vendor."""
    flags: list[Flag] = []
    prefix = obs.bssid.oui_prefix
    if prefix in deny_list:
        flags.append(Flag(
            level=FlagLevel.CRITICAL_NEGATIVE, code="ID_DENYLISTED_OUI",
            message="hardware vendor prefix is on the operator deny list",
            evidence={"oui": prefix, "bssid": str(obs.bssid)}))
    if is_locally_administered(obs.bssid):
        flags.append(Flag(
            level=FlagLevel.POTENTIAL_NEGATIVE, code="ID_RANDOM_MAC",
            message="locally administered address: the BSSID carries no "
                    "vendor identity",
            evidence={"bssid": str(obs.bssid)}))
    elif registry is not None and not registry.lookup(obs.bssid).matched:
        flags.append(Flag(
            level=FlagLevel.POTENTIAL_NEGATIVE, code="ID_UNKNOWN_VENDOR",
            message="globally administered address with no vendor registry match",
            evidence={"oui": prefix, "bssid": str(obs.bssid)}))
    return flags


def _prior_ssid_records(history: Optional[ApHistory], ssid_data: bytes,
                        before) -> list[AccessPointObservation]:
    if history is None:
        return []
    return [r for r in history.records
            if r.ssid.data == ssid_data and r.observed_at < before]


def twin_flags(batch: ScanBatch,
               histories: Mapping[Bssid, ApHistory]) -> dict[Bssid, list[Flag]]:
    """Evil-twin heuristics over same-SSID groups.

    (a) security classes differ within the group: every member is flagged;
    (b) a member with no history for the SSID advertises strictly weaker
        security than an established carrier of that SSID;
    (c) otherwise, multiple BSSIDs sharing the SSID is still worth noting.
    Hidden SSIDs never group.
    """
    result: dict[Bssid, list[Flag]] = {}
    groups: dict[bytes, list[AccessPointObservation]] = {}
    for obs in batch.observations:
        if obs.ssid.hidden:
            continue
        groups.setdefault(obs.ssid.data, []).append(obs)

    for ssid_data, members in groups.items():
        ssid_display = members[0].ssid.display
        group_bssids = ",".join(sorted(str(m.bssid) for m in members))
        fired = False

        classes = {m.security for m in members}
        if len(members) > 1 and len(classes) > 1:
            fired = True
            class_names = ",".join(sorted(c.value for c in classes))
            for member in members:
                result.setdefault(member.bssid, []).append(Flag(
                    level=FlagLevel.NEGATIVE, code="TWIN_SECURITY_MISMATCH",
                    message="networks sharing this name advertise different "
                            "security configurations",
                    evidence={"ssid": ssid_display, "bssids": group_bssids,
                              "classes": class_names}))

        # established carriers of this SSID, from any BSSID ever stored
        for member in members:
            own_prior = _prior_ssid_records(histories.get(member.bssid),
                                            ssid_data, member.observed_at)
            if own_prior:
                continue  # not new to this SSID
            member_level = protocol_severity(member.security)
            incumbents: list[tuple[Bssid, SecurityClass]] = []
            for bssid, history in histories.items():
                if bssid == member.bssid:
                    continue
                prior = _prior_ssid_records(history, ssid_data,
                                            member.observed_at)
                if len(prior) >= ESTABLISHED_SIGHTINGS:
                    incumbents.append((bssid, prior[-1].security))
            weaker_than = [
                (bssid, klass) for bssid, klass in incumbents
                if member_level > protocol_severity(klass)]
            if weaker_than:
                fired = True
                incumbent_text = ",".join(
                    f"{b}={k.value}" for b, k in sorted(
                        weaker_than, key=lambda pair: str(pair[0])))
                result.setdefault(member.bssid, []).append(Flag(
                    level=FlagLevel.CRITICAL_NEGATIVE, code="TWIN_NEW_WEAKER",
                    message="new network advertises weaker security than the "
                            "established carrier of this name",
                    evidence={"ssid": ssid_display,
                              "member_security": member.security.value,
                              "established": incumbent_text}))

        if not fired and len(members) > 1:
            for member in members:
                result.setdefault(member.bssid, []).append(Flag(
                    level=FlagLevel.POTENTIAL_NEGATIVE,
                    code="TWIN_SSID_COLLISION",
                    message="multiple access points share this name in one scan",
                    evidence={"ssid": ssid_display, "bssids": group_bssids}))
    return result


_DEVIATION_RULES: Mapping[DeviationKind, tuple[str, FlagLevel, str]] = {
    DeviationKind.SECURITY_CHANGED: (
        "HIST_SECURITY_CHANGED", FlagLevel.NEGATIVE,
        "security configuration differs from this AP's own history"),
    DeviationKind.SSID_CHANGED: (
        "HIST_SSID_CHANGED", FlagLevel.NEGATIVE,
        "advertised name differs from this AP's own history"),
    DeviationKind.CHANNEL_CHANGED: (
        "HIST_CHANNEL_CHANGED", FlagLevel.POTENTIAL_NEGATIVE,
        "operating channel differs from this AP's own history"),
}


def deviation_flags(deviations: list[Deviation]) -> list[Flag]:
    flags = []
    for deviation in deviations:
        code, level, message = _DEVIATION_RULES[deviation.kind]
        flags.append(Flag(
            level=level, code=code, message=message,
            evidence={"before": deviation.before, "after": deviation.after}))
    return flags


def wigle_flags(outcome: Union[WigleFinding, WigleUnavailable, None]) -> list[Flag]:
    """Flags from public-database comparison; None means lookups were off."""
    if outcome is None:
        return []
    if isinstance(outcome, WigleUnavailable):
        return [Flag(
            level=FlagLevel.UNDETERMINED, code="WIGLE_UNAVAILABLE",
            message="public-database lookup could not complete",
            evidence={"error": outcome.error_code})]
    status = outcome.status
    if status is WigleStatus.UNKNOWN_TO_WIGLE:
        return [Flag(
            level=FlagLevel.POTENTIAL_NEGATIVE, code="WIGLE_UNKNOWN",
            message="no public record of this BSSID exists",
            evidence={"status": status.value})]
    if status in (WigleStatus.SSID_MISMATCH, WigleStatus.SECURITY_MISMATCH):
        return [Flag(
            level=FlagLevel.NEGATIVE, code="WIGLE_CHANGED",
            message="public record disagrees with what this AP advertises",
            evidence={"status": status.value})]
    if status is WigleStatus.LOCATION_MISMATCH:
        return [Flag(
            level=FlagLevel.NEGATIVE, code="WIGLE_LOCATION",
            message="AP is far from its publicly recorded location",
            evidence={"status": status.value,
                      "distance_km": f"{outcome.distance_km:.3f}"})]
    return []


def assess(context: RuleContext) -> dict[Bssid, ApFlagSet]:
    """Run every applicable rule over a normalized batch.

    Pure: equal contexts produce equal results. Missing optional context
    (registry, wigle, probes) silently skips the corresponding rules.
    """
    twins = twin_flags(context.batch, context.histories)
    result: dict[Bssid, ApFlagSet] = {}
    for obs in context.batch.observations:
        flags: list[Flag] = []
        flags.extend(protocol_flags(obs))
        flags.extend(identity_flags(obs, context.registry, context.deny_list))
        flags.extend(twins.get(obs.bssid, []))
        history = context.histories.get(obs.bssid)
        if history is not None and history.records:
            flags.extend(deviation_flags(detect_deviations(history, obs)))
        if context.wigle is not None:
            flags.extend(wigle_flags(context.wigle.get(obs.bssid)))
        probe_result = context.probes.get(obs.bssid)
        if probe_result is not None:
            flags.extend(probe_flags(probe_result))
        result[obs.bssid] = ApFlagSet.from_flags(obs.bssid, flags)
    return result
