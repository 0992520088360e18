"""Assessment pipeline: compose stores, rules, and scoring into documents.

The CLI and the HTTP service both render assessments through this module, so
the same inputs produce byte-identical JSON on either surface.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .errors import WigleError
from .feedback import FeedbackStore
from .history import ApHistory, HistoryStore
from .ingest import ScanBatch
from .model import (
    AccessPointObservation,
    Bssid,
    Flag,
    observation_to_dict,
)
from .oui import OuiRegistry
from .probe import ProbeResult
from .recommend import (
    CommunitySignal,
    RiskPosture,
    ScoringConfig,
    Verdict,
    DEFAULT_SCORING,
    community_signal,
    recommend,
)
from .rules import ApFlagSet, RuleContext, assess
from .wigle import WigleClient, WigleFinding, WigleUnavailable, compare

log = logging.getLogger(__name__)


def render_json(payload: Any) -> str:
    """The one JSON renderer for externally visible documents.

    Two-space indent, ASCII-safe, insertion-ordered keys, trailing newline:
    equal payloads always serialize to equal bytes.
    """
    return json.dumps(payload, indent=2, ensure_ascii=True) + "\n"


@dataclass
class Workspace:
    """Filesystem layout derived from one history-store path.

    The registry, deny list, feedback log, and lookup cache live beside the
    history file unless explicitly overridden.
    """

    history_path: Path
    oui_path: Path
    deny_path: Path
    feedback_path: Path
    wigle_cache_dir: Path

    @classmethod
    def at(cls, db_path: Union[str, Path]) -> "Workspace":
        base = Path(db_path)
        home = base.parent
        return cls(history_path=base,
                   oui_path=home / "oui.manuf",
                   deny_path=home / "deny-list.txt",
                   feedback_path=home / "feedback.jsonl",
                   wigle_cache_dir=home / "wigle-cache")


def load_deny_list(path: Union[str, Path]) -> frozenset[str]:
    """Read one canonical OUI prefix (aa:bb:cc) per line; '#' comments allowed."""
    prefixes = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            entry = line.split("#", 1)[0].strip().lower().replace("-", ":")
            if entry:
                prefixes.add(entry)
    return frozenset(prefixes)


@dataclass(frozen=True)
class AssessmentEntry:
    observation: AccessPointObservation
    flag_set: ApFlagSet
    community: CommunitySignal
    verdict: Verdict
    vendor: Optional[str]


def gather_histories(store: Optional[HistoryStore],
                     batch: ScanBatch) -> dict[Bssid, ApHistory]:
    """Histories for the batch's BSSIDs plus every BSSID that has carried one
    of the batch's SSIDs (needed by the twin rules)."""
    if store is None:
        return {}
    wanted: set[Bssid] = {obs.bssid for obs in batch.observations}
    for obs in batch.observations:
        wanted |= store.bssids_for_ssid(obs.ssid)
    histories = {}
    for bssid in wanted:
        history = store.full_history(bssid)
        if history.records:
            histories[bssid] = history
    return histories


def gather_wigle(client: Optional[WigleClient], batch: ScanBatch
                 ) -> Optional[dict[Bssid, Union[WigleFinding, WigleUnavailable]]]:
    if client is None:
        return None
    outcomes: dict[Bssid, Union[WigleFinding, WigleUnavailable]] = {}
    for obs in batch.observations:
        try:
            detail = client.lookup(obs.bssid)
        except WigleError as exc:
            outcomes[obs.bssid] = WigleUnavailable(error_code=exc.code)
            continue
        outcomes[obs.bssid] = compare(detail, obs)
    return outcomes


def assess_batch(batch: ScanBatch, *, posture: RiskPosture,
                 now: datetime,
                 history: Optional[HistoryStore] = None,
                 feedback: Optional[FeedbackStore] = None,
                 registry: Optional[OuiRegistry] = None,
                 deny_list: frozenset[str] = frozenset(),
                 wigle: Optional[WigleClient] = None,
                 probes: Optional[Mapping[Bssid, ProbeResult]] = None,
                 scoring: ScoringConfig = DEFAULT_SCORING) -> list[AssessmentEntry]:
    """Assess a normalized batch; entries come back worst-first."""
    context = RuleContext(
        batch=batch,
        registry=registry,
        histories=gather_histories(history, batch),
        wigle=gather_wigle(wigle, batch),
        probes=dict(probes or {}),
        deny_list=deny_list,
    )
    flag_sets = assess(context)
    entries = []
    for obs in batch.observations:
        flag_set = flag_sets[obs.bssid]
        reports = feedback.reports_for(obs.bssid) if feedback else []
        signal = community_signal(reports, now, scoring)
        verdict = recommend(flag_set, signal, posture, scoring)
        vendor = None
        if registry is not None:
            match = registry.lookup(obs.bssid)
            vendor = match.short_name if match.matched else None
        entries.append(AssessmentEntry(observation=obs, flag_set=flag_set,
                                       community=signal, verdict=verdict,
                                       vendor=vendor))
    entries.sort(key=lambda e: (-int(e.verdict.decision), -e.verdict.score,
                                e.observation.bssid.octets))
    return entries


def flag_to_dict(flag: Flag) -> dict[str, Any]:
    return {
        "level": flag.level.name,
        "code": flag.code,
        "message": flag.message,
        "evidence": {key: flag.evidence[key] for key in sorted(flag.evidence)},
    }


def entry_to_dict(entry: AssessmentEntry) -> dict[str, Any]:
    obs = entry.observation
    return {
        "observation": observation_to_dict(obs),
        "ssid": obs.ssid.display,
        "hidden": obs.ssid.hidden,
        "security": obs.security.value,
        "wps_advertised": obs.wps_advertised,
        "vendor": entry.vendor,
        "flags": [flag_to_dict(f) for f in entry.flag_set.flags],
        "community": {
            "n_reports": entry.community.n_reports,
            "weight_total": entry.community.weight_total,
            "failure_rate": entry.community.failure_rate,
        },
        "verdict": {
            "decision": entry.verdict.decision.name,
            "score": entry.verdict.score,
            "reasons": list(entry.verdict.reasons),
        },
    }


def assessment_document(entries: list[AssessmentEntry]) -> list[dict[str, Any]]:
    """The assessment body: an array of per-AP entries, worst first."""
    return [entry_to_dict(e) for e in entries]


def render_assessment(entries: list[AssessmentEntry]) -> str:
    return render_json(assessment_document(entries))
