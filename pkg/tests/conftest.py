"""Shared fixtures and builders for the wificue test suite."""

from __future__ import annotations

import shutil
from datetime import datetime, timezone
from pathlib import Path

import pytest

from wificue.model import AccessPointObservation, Location, Ssid, parse_bssid

FIXTURES = Path(__file__).parent / "fixtures"

NOW = datetime(2025, 6, 1, 12, 0, 0, tzinfo=timezone.utc)
NOW_TEXT = "2025-06-01T12:00:00Z"


def make_observation(
    bssid: str = "00:14:22:0a:0b:0c",
    ssid: str = "TestNet",
    capabilities: str = "[WPA2-PSK-CCMP][ESS]",
    observed_at: datetime | None = None,
    scanner_id: str = "test-scanner",
    channel: int = 6,
    frequency_mhz: int = 2437,
    rssi_dbm: int = -60,
    lat: float | None = None,
    lon: float | None = None,
    accuracy_m: float | None = None,
) -> AccessPointObservation:
    location = None
    if lat is not None and lon is not None:
        location = Location(lat=lat, lon=lon, accuracy_m=accuracy_m)
    return AccessPointObservation(
        observed_at=observed_at or NOW,
        scanner_id=scanner_id,
        bssid=parse_bssid(bssid),
        ssid=Ssid.from_text(ssid),
        capabilities=capabilities,
        channel=channel,
        frequency_mhz=frequency_mhz,
        rssi_dbm=rssi_dbm,
        location=location,
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def workspace(tmp_path: Path) -> Path:
    """A temporary workspace seeded with the committed fixture corpus.

    Layout matches what the CLI and service expect to find beside the
    history database: oui.manuf, deny-list.txt, feedback.jsonl.
    """
    work = tmp_path / "work"
    work.mkdir()
    shutil.copy(FIXTURES / "seed_history.jsonl", work / "history.jsonl")
    shutil.copy(FIXTURES / "feedback_seed.jsonl", work / "feedback.jsonl")
    shutil.copy(FIXTURES / "oui.manuf", work / "oui.manuf")
    shutil.copy(FIXTURES / "deny-list.txt", work / "deny-list.txt")
    return work


@pytest.fixture
def empty_workspace(tmp_path: Path) -> Path:
    """A temporary workspace with registry and deny list but no history."""
    work = tmp_path / "empty-work"
    work.mkdir()
    shutil.copy(FIXTURES / "oui.manuf", work / "oui.manuf")
    shutil.copy(FIXTURES / "deny-list.txt", work / "deny-list.txt")
    return work
