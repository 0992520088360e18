"""Recommendation engine: community feedback decay, scoring, posture verdicts.

Feedback reports lose influence with a 14-day half-life. When too little
weighted evidence exists the community signal is reported as undetermined
rather than pretending to a failure rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .errors import ConfigError, FutureTimestamp
from .model import Bssid, Flag, FlagLevel

SECONDS_PER_DAY = 86400.0


class FeedbackCategory(Enum):
    NO_INTERNET = "NO_INTERNET"
    APP_FAILURE = "APP_FAILURE"
    PORTAL_HIJACK = "PORTAL_HIJACK"
    CERT_WARNING = "CERT_WARNING"
    SLOW = "SLOW"
    WORKED_OK = "WORKED_OK"


# Categories that count toward the failure rate; SLOW and WORKED_OK do not.
NEGATIVE_CATEGORIES = frozenset({
    FeedbackCategory.NO_INTERNET,
    FeedbackCategory.APP_FAILURE,
    FeedbackCategory.PORTAL_HIJACK,
    FeedbackCategory.CERT_WARNING,
})


@dataclass(frozen=True)
class FeedbackReport:
    bssid: Bssid
    ssid: str
    category: FeedbackCategory
    observed_at: datetime
    reporter_id: str

    def __post_init__(self):
        if self.observed_at.tzinfo is None:
            raise ValueError("observed_at must be timezone-aware")
        if not self.reporter_id:
            raise ValueError("reporter_id must be non-empty")


@dataclass(frozen=True)
class CommunitySignal:
    """Decay-weighted summary of feedback for one AP."""

    n_reports: int
    weight_total: float
    failure_rate: Optional[float]

    @property
    def undetermined(self) -> bool:
        return self.failure_rate is None


class RiskPosture(Enum):
    CONSERVATIVE = "conservative"
    BALANCED = "balanced"
    PERMISSIVE = "permissive"


class Decision(IntEnum):
    """Verdict outcomes; numerically higher is worse."""

    ACCEPTABLE = 0
    CAUTION = 1
    AVOID = 2


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    score: float
    reasons: tuple[str, ...]


_DEFAULT_LEVEL_WEIGHTS: Mapping[FlagLevel, float] = {
    FlagLevel.CRITICAL_NEGATIVE: 10.0,
    FlagLevel.NEGATIVE: 3.0,
    FlagLevel.POTENTIAL_NEGATIVE: 1.0,
    FlagLevel.UNDETERMINED: 0.0,
}

# (acceptable_max, caution_max): score <= first is ACCEPTABLE, <= second is
# CAUTION, anything above is AVOID.
_DEFAULT_THRESHOLDS: Mapping[RiskPosture, tuple[float, float]] = {
    RiskPosture.CONSERVATIVE: (1.0, 3.0),
    RiskPosture.BALANCED: (3.0, 6.0),
    RiskPosture.PERMISSIVE: (6.0, 10.0),
}


@dataclass(frozen=True)
class ScoringConfig:
    """Tunable scoring knobs; the defaults are the documented contract."""

    half_life_days: float = 14.0
    evidence_floor: float = 1.0
    community_coefficient: float = 5.0
    level_weights: Mapping[FlagLevel, float] = field(
        default_factory=lambda: dict(_DEFAULT_LEVEL_WEIGHTS))
    thresholds: Mapping[RiskPosture, tuple[float, float]] = field(
        default_factory=lambda: dict(_DEFAULT_THRESHOLDS))

    def __post_init__(self):
        if self.half_life_days <= 0:
            raise ConfigError("half_life_days must be positive")
        for posture, (acceptable_max, caution_max) in self.thresholds.items():
            if acceptable_max > caution_max:
                raise ConfigError(
                    f"thresholds for {posture.value} are out of order")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScoringConfig":
        """Load overrides from a JSON file; unspecified knobs keep defaults."""
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load scoring config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("scoring config must be a JSON object")
        kwargs: dict = {}
        for knob in ("half_life_days", "evidence_floor", "community_coefficient"):
            if knob in raw:
                value = raw[knob]
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{knob} must be a number")
                kwargs[knob] = float(value)
        if "level_weights" in raw:
            weights = dict(_DEFAULT_LEVEL_WEIGHTS)
            for name, value in raw["level_weights"].items():
                try:
                    level = FlagLevel[name]
                except KeyError:
                    raise ConfigError(f"unknown flag level {name!r}") from None
                weights[level] = float(value)
            kwargs["level_weights"] = weights
        if "posture_thresholds" in raw:
            thresholds = dict(_DEFAULT_THRESHOLDS)
            for name, pair in raw["posture_thresholds"].items():
                try:
                    posture = RiskPosture(name.lower())
                except ValueError:
                    raise ConfigError(f"unknown posture {name!r}") from None
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ConfigError(f"thresholds for {name!r} must be a pair")
                thresholds[posture] = (float(pair[0]), float(pair[1]))
            kwargs["thresholds"] = thresholds
        return cls(**kwargs)


DEFAULT_SCORING = ScoringConfig()


def decay_weight(age_days: float, half_life_days: float = 14.0) -> float:
    """0.5 ** (age / half_life); age 0 weighs 1.0, one half-life weighs 0.5."""
    if age_days < 0:
        raise FutureTimestamp(f"report is {-age_days:.3f} days in the future")
    return 0.5 ** (age_days / half_life_days)


def community_signal(reports: Iterable[FeedbackReport], now: datetime,
                     config: ScoringConfig = DEFAULT_SCORING) -> CommunitySignal:
    """Aggregate reports into a decayed failure rate.

    Raises FUTURE_TIMESTAMP if any report postdates ``now``. Total weight
    below the evidence floor yields an undetermined signal.
    """
    weight_total = 0.0
    negative_weight = 0.0
    count = 0
    for report in reports:
        count += 1
        age_days = (now - report.observed_at).total_seconds() / SECONDS_PER_DAY
        weight = decay_weight(age_days, config.half_life_days)
        weight_total += weight
        if report.category in NEGATIVE_CATEGORIES:
            negative_weight += weight
    if weight_total < config.evidence_floor:
        return CommunitySignal(n_reports=count, weight_total=weight_total,
                               failure_rate=None)
    return CommunitySignal(n_reports=count, weight_total=weight_total,
                           failure_rate=negative_weight / weight_total)


def score(flags: Iterable[Flag], community: CommunitySignal,
          config: ScoringConfig = DEFAULT_SCORING) -> float:
    """Sum of per-flag level weights plus the scaled community failure rate."""
    total = sum(config.level_weights[f.level] for f in flags)
    if not community.undetermined:
        total += config.community_coefficient * community.failure_rate
    return total


def community_summary(signal: CommunitySignal) -> str:
    if signal.undetermined:
        return (f"community: undetermined (n={signal.n_reports}, "
                f"weight={signal.weight_total:.2f})")
    return (f"community: failure_rate={signal.failure_rate:.2f} "
            f"(n={signal.n_reports}, weight={signal.weight_total:.2f})")


def recommend(flags: Iterable[Flag], community: CommunitySignal,
              posture: RiskPosture,
              config: ScoringConfig = DEFAULT_SCORING) -> Verdict:
    """Produce a verdict: any critical flag forces AVOID regardless of score."""
    flag_list = sorted(flags, key=lambda f: f.sort_key)
    total = score(flag_list, community, config)
    if any(f.level is FlagLevel.CRITICAL_NEGATIVE for f in flag_list):
        decision = Decision.AVOID
    else:
        acceptable_max, caution_max = config.thresholds[posture]
        if total <= acceptable_max:
            decision = Decision.ACCEPTABLE
        elif total <= caution_max:
            decision = Decision.CAUTION
        else:
            decision = Decision.AVOID
    reasons = tuple(f.code for f in flag_list) + (community_summary(community),)
    return Verdict(decision=decision, score=total, reasons=reasons)
