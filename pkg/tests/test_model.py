"""Tests for core value types: BSSIDs, SSIDs, security classes, flags,
timestamps, and the observation wire format."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wificue.errors import MalformedBssid, MulticastBssid, SchemaViolation
from wificue.model import (
    FLAG_CODES,
    AccessPointObservation,
    Bssid,
    Flag,
    FlagLevel,
    Location,
    SecurityClass,
    Ssid,
    classify_security,
    decode_observation,
    encode_observation,
    format_rfc3339,
    observation_from_dict,
    observation_to_dict,
    parse_bssid,
    parse_rfc3339,
)
from tests.conftest import NOW, make_observation

unicast_octet = st.integers(min_value=0, max_value=255).filter(lambda b: not b & 0x01)
other_octets = st.integers(min_value=0, max_value=255)


@st.composite
def bssids(draw):
    first = draw(unicast_octet)
    rest = draw(st.lists(other_octets, min_size=5, max_size=5))
    return Bssid(bytes([first] + rest))


class TestBssid:
    def test_parse_colon_form(self):
        b = parse_bssid("00:14:22:0A:0B:0C")
        assert b.octets == bytes([0x00, 0x14, 0x22, 0x0A, 0x0B, 0x0C])

    def test_parse_dash_form(self):
        assert parse_bssid("00-14-22-0a-0b-0c") == parse_bssid("00:14:22:0a:0b:0c")

    def test_str_is_lowercase_colon_hex(self):
        assert str(parse_bssid("A8-BB-CC-DD-EE-01")) == "a8:bb:cc:dd:ee:01"

    def test_oui_prefix(self):
        assert parse_bssid("A8:bb:CC:dd:EE:01").oui_prefix == "a8:bb:cc"

    @pytest.mark.parametrize(
        "text",
        ["", "00:14:22:0a:0b", "00:14:22:0a:0b:0c:0d", "00:14:22:0a:0b:zz",
         "001422:0a0b0c", "00.14.22.0a.0b.0c", "0:14:22:0a:0b:0c"],
    )
    def test_malformed_rejected(self, text):
        with pytest.raises(MalformedBssid):
            parse_bssid(text)

    def test_multicast_rejected(self):
        with pytest.raises(MulticastBssid):
            parse_bssid("01:00:5e:00:00:01")

    def test_broadcast_rejected(self):
        with pytest.raises(MulticastBssid):
            parse_bssid("ff:ff:ff:ff:ff:ff")

    def test_wrong_length_bytes_rejected(self):
        with pytest.raises(MalformedBssid):
            Bssid(b"\x00\x14\x22")

    def test_locally_administered_bit(self):
        assert parse_bssid("02:00:00:00:00:01").locally_administered
        assert not parse_bssid("00:00:00:00:00:01").locally_administered

    @given(bssids())
    def test_parse_str_roundtrip(self, b):
        assert parse_bssid(str(b)) == b

    @given(bssids())
    def test_ordering_follows_octets(self, b):
        assert (b.octets < b.octets) is False


class TestSsid:
    def test_from_text_roundtrip(self):
        s = Ssid.from_text("CoffeeShack")
        assert s.display == "CoffeeShack"
        assert not s.hidden

    def test_b64_roundtrip(self):
        s = Ssid.from_text("FreeAirportWiFi")
        assert Ssid.from_b64(s.b64) == s

    def test_empty_is_hidden(self):
        assert Ssid(b"").hidden
        assert Ssid.from_b64("").hidden

    def test_non_utf8_bytes_display(self):
        s = Ssid(b"\xff\xfe")
        assert s.hidden is False
        assert isinstance(s.display, str)

    def test_over_32_bytes_rejected(self):
        with pytest.raises(ValueError):
            Ssid(b"x" * 33)

    def test_32_bytes_accepted(self):
        assert len(Ssid(b"x" * 32).data) == 32

    @given(st.binary(min_size=0, max_size=32))
    def test_b64_roundtrip_any_bytes(self, raw):
        s = Ssid(raw)
        assert Ssid.from_b64(s.b64).data == raw


class TestRfc3339:
    def test_parse_z_suffix(self):
        dt = parse_rfc3339("2025-06-01T12:00:00Z")
        assert dt == NOW

    def test_parse_offset(self):
        dt = parse_rfc3339("2025-06-01T14:00:00+02:00")
        assert dt == NOW

    def test_microseconds_truncated(self):
        dt = parse_rfc3339("2025-06-01T12:00:00.987654Z")
        assert dt == NOW

    def test_naive_rejected(self):
        with pytest.raises(ValueError):
            parse_rfc3339("2025-06-01T12:00:00")

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            parse_rfc3339("last tuesday")

    def test_format_is_z_seconds(self):
        assert format_rfc3339(NOW) == "2025-06-01T12:00:00Z"

    def test_format_converts_to_utc(self):
        offset = NOW.astimezone(timezone(timedelta(hours=5)))
        assert format_rfc3339(offset) == "2025-06-01T12:00:00Z"

    @given(
        st.datetimes(
            min_value=datetime(2000, 1, 1),
            max_value=datetime(2099, 12, 31),
        )
    )
    def test_format_parse_roundtrip(self, naive):
        dt = naive.replace(microsecond=0, tzinfo=timezone.utc)
        assert parse_rfc3339(format_rfc3339(dt)) == dt


class TestClassifySecurity:
    @pytest.mark.parametrize(
        "capabilities, expected_class, expected_wps",
        [
            ("[WPA2-PSK-CCMP][ESS]", SecurityClass.WPA2_PSK, False),
            ("[WPA2-PSK-CCMP][WPS][ESS]", SecurityClass.WPA2_PSK, True),
            ("[WPA2-EAP-CCMP][ESS]", SecurityClass.WPA2_ENTERPRISE, False),
            ("[WPA3-SAE-CCMP][ESS]", SecurityClass.WPA3_SAE, False),
            ("[SAE]", SecurityClass.WPA3_SAE, False),
            ("[WPA3-EAP-CCMP]", SecurityClass.WPA3_ENTERPRISE, False),
            ("[WPA-PSK-TKIP]", SecurityClass.WPA_TKIP, False),
            ("[WEP]", SecurityClass.WEP, False),
            ("[OWE]", SecurityClass.OWE, False),
            ("[ESS]", SecurityClass.OPEN, False),
            ("[IBSS]", SecurityClass.OPEN, False),
            ("", SecurityClass.UNKNOWN, False),
            ("[FOO]", SecurityClass.UNKNOWN, False),
            ("[FOO][BAR]", SecurityClass.UNKNOWN, False),
            # Strongest recognized class wins regardless of token order.
            ("[WPA-PSK-TKIP][WPA2-PSK-CCMP][ESS]", SecurityClass.WPA2_PSK, False),
            ("[WPA2-PSK-CCMP][WPA-PSK-TKIP][ESS]", SecurityClass.WPA2_PSK, False),
            ("[WEP][WPA2-PSK-CCMP]", SecurityClass.WPA2_PSK, False),
            ("[WPA2-PSK-CCMP][WPA3-SAE-CCMP]", SecurityClass.WPA3_SAE, False),
            # Unrecognized tokens are ignored when anything is recognized.
            ("[FOO][WPA2-PSK-CCMP]", SecurityClass.WPA2_PSK, False),
            ("[FOO][ESS]", SecurityClass.OPEN, False),
            # WPS alone marks the flag but grants no security class.
            ("[WPS][ESS]", SecurityClass.OPEN, True),
            ("[WPS]", SecurityClass.OPEN, True),
        ],
    )
    def test_table(self, capabilities, expected_class, expected_wps):
        cls, wps = classify_security(capabilities)
        assert cls is expected_class
        assert wps is expected_wps

    def test_wps_detected_only_from_wps_token(self):
        cls, wps = classify_security("[WPA2-PSK-CCMP+WPSBOGUS][ESS]")
        assert wps is False

    @given(st.text(max_size=64))
    def test_never_raises(self, text):
        cls, wps = classify_security(text)
        assert isinstance(cls, SecurityClass)
        assert isinstance(wps, bool)


class TestFlag:
    def test_levels_are_ordered(self):
        assert (
            FlagLevel.UNDETERMINED
            < FlagLevel.POTENTIAL_NEGATIVE
            < FlagLevel.NEGATIVE
            < FlagLevel.CRITICAL_NEGATIVE
        )

    def test_unregistered_code_rejected(self):
        with pytest.raises(ValueError):
            Flag(level=FlagLevel.NEGATIVE, code="SEC_BOGUS", message="nope")

    def test_sort_key_orders_by_severity_then_code(self):
        flags = [
            Flag(FlagLevel.POTENTIAL_NEGATIVE, "SEC_WPA2_PSK", "a"),
            Flag(FlagLevel.CRITICAL_NEGATIVE, "SEC_WEP", "b"),
            Flag(FlagLevel.POTENTIAL_NEGATIVE, "ID_RANDOM_MAC", "c"),
        ]
        ordered = sorted(flags, key=lambda f: f.sort_key)
        assert [f.code for f in ordered] == ["SEC_WEP", "ID_RANDOM_MAC", "SEC_WPA2_PSK"]

    def test_registry_has_expected_sections(self):
        prefixes = {code.split("_")[0] for code in FLAG_CODES}
        assert prefixes == {"SEC", "ID", "TWIN", "HIST", "WIGLE", "PROBE"}

    def test_evidence_defaults_empty(self):
        f = Flag(FlagLevel.NEGATIVE, "SEC_OPEN", "open network")
        assert dict(f.evidence) == {}


class TestLocation:
    def test_valid(self):
        loc = Location(lat=38.88, lon=-77.10, accuracy_m=5.0)
        assert loc.lat == 38.88

    @pytest.mark.parametrize("lat,lon", [(91, 0), (-91, 0), (0, 181), (0, -181)])
    def test_out_of_range_rejected(self, lat, lon):
        with pytest.raises(ValueError):
            Location(lat=lat, lon=lon)

    def test_negative_accuracy_rejected(self):
        with pytest.raises(ValueError):
            Location(lat=0, lon=0, accuracy_m=-1)


class TestObservation:
    def test_security_derived_from_capabilities(self):
        obs = make_observation(capabilities="[WEP]")
        assert obs.security is SecurityClass.WEP
        assert obs.wps_advertised is False

    def test_wps_derived(self):
        obs = make_observation(capabilities="[WPA2-PSK-CCMP][WPS][ESS]")
        assert obs.wps_advertised is True

    def test_timestamp_truncated_to_second_utc(self):
        aware = datetime(2025, 6, 1, 7, 0, 0, 654321, tzinfo=timezone(timedelta(hours=-5)))
        obs = make_observation(observed_at=aware)
        assert obs.observed_at == NOW
        assert obs.observed_at.tzinfo == timezone.utc

    def test_naive_timestamp_rejected(self):
        with pytest.raises(ValueError):
            make_observation(observed_at=datetime(2025, 6, 1))

    @pytest.mark.parametrize("rssi", [-121, 1, True])
    def test_rssi_range_enforced(self, rssi):
        with pytest.raises(ValueError):
            make_observation(rssi_dbm=rssi)

    @pytest.mark.parametrize("channel", [-1, True])
    def test_channel_validated(self, channel):
        with pytest.raises(ValueError):
            make_observation(channel=channel)

    def test_wire_dict_key_order(self):
        obs = make_observation(lat=38.88, lon=-77.10, accuracy_m=4.0)
        keys = list(observation_to_dict(obs).keys())
        assert keys == [
            "observed_at", "scanner_id", "bssid", "ssid_b64", "capabilities",
            "channel", "frequency_mhz", "rssi_dbm", "lat", "lon", "accuracy_m",
        ]

    def test_wire_dict_omits_absent_location(self):
        record = observation_to_dict(make_observation())
        assert "lat" not in record and "lon" not in record and "accuracy_m" not in record

    def test_from_dict_roundtrip(self):
        obs = make_observation(lat=38.88, lon=-77.10, accuracy_m=4.0)
        assert observation_from_dict(observation_to_dict(obs)) == obs

    def test_unknown_field_rejected(self):
        record = observation_to_dict(make_observation())
        record["extra"] = 1
        with pytest.raises(SchemaViolation) as exc_info:
            observation_from_dict(record)
        assert "extra" in str(exc_info.value)

    @pytest.mark.parametrize(
        "field", ["observed_at", "scanner_id", "bssid", "ssid_b64",
                  "capabilities", "channel", "frequency_mhz", "rssi_dbm"],
    )
    def test_missing_required_field_rejected(self, field):
        record = observation_to_dict(make_observation())
        del record[field]
        with pytest.raises(SchemaViolation) as exc_info:
            observation_from_dict(record)
        assert exc_info.value.details.get("field") == field

    def test_lat_without_lon_rejected(self):
        record = observation_to_dict(make_observation())
        record["lat"] = 38.88
        with pytest.raises(SchemaViolation):
            observation_from_dict(record)

    def test_accuracy_without_coordinates_rejected(self):
        record = observation_to_dict(make_observation())
        record["accuracy_m"] = 5.0
        with pytest.raises(SchemaViolation):
            observation_from_dict(record)

    def test_future_timestamp_rejected_at_ingest(self):
        record = observation_to_dict(make_observation(observed_at=NOW + timedelta(days=2)))
        with pytest.raises(SchemaViolation):
            observation_from_dict(record, now=NOW)

    def test_near_future_within_tolerance_accepted(self):
        record = observation_to_dict(make_observation(observed_at=NOW + timedelta(hours=23)))
        obs = observation_from_dict(record, now=NOW)
        assert obs.observed_at > NOW

    def test_line_no_carried_in_violation(self):
        with pytest.raises(SchemaViolation) as exc_info:
            observation_from_dict({"observed_at": "bogus"}, line_no=7)
        assert exc_info.value.details.get("line_no") == 7

    def test_encode_is_compact_single_line(self):
        text = encode_observation(make_observation())
        assert "\n" not in text
        assert ": " not in text
        json.loads(text)

    def test_encode_decode_roundtrip(self):
        obs = make_observation(lat=1.5, lon=2.5, accuracy_m=3.0)
        assert decode_observation(encode_observation(obs)) == obs

    @given(
        bssids(),
        st.binary(min_size=0, max_size=32),
        st.integers(min_value=-120, max_value=0),
        st.integers(min_value=0, max_value=200),
        st.sampled_from(
            ["[WPA2-PSK-CCMP][ESS]", "[WEP]", "[ESS]", "", "[SAE]",
             "[WPA-PSK-TKIP][WPA2-PSK-CCMP][WPS][ESS]", "[OWE]"]
        ),
    )
    @settings(max_examples=60)
    def test_wire_roundtrip_property(self, bssid, ssid_bytes, rssi, channel, caps):
        obs = AccessPointObservation(
            observed_at=NOW,
            scanner_id="prop-scanner",
            bssid=bssid,
            ssid=Ssid(ssid_bytes),
            capabilities=caps,
            channel=channel,
            frequency_mhz=2412,
            rssi_dbm=rssi,
        )
        decoded = decode_observation(encode_observation(obs))
        assert decoded == obs
        assert decoded.security is obs.security
