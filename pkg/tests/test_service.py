"""Tests for the HTTP service: endpoint contracts, the error envelope, body
limits, bearer auth, and agreement with the CLI's JSON output."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from wificue.errors import ConfigError
from wificue.model import observation_to_dict
from wificue.service import MAX_BODY_BYTES, ServiceConfig, create_app
from tests.conftest import FIXTURES, NOW, NOW_TEXT, make_observation


def scan_records():
    lines = (FIXTURES / "golden_scan.jsonl").read_text().splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def make_client(workspace, **overrides) -> TestClient:
    kwargs = dict(
        db_path=workspace / "history.jsonl",
        baselines_dir=FIXTURES / "baselines",
        now_override=NOW,
    )
    kwargs.update(overrides)
    config = ServiceConfig(**kwargs)
    return TestClient(create_app(config), raise_server_exceptions=False)


def assert_envelope(response, status, code):
    assert response.status_code == status
    body = response.json()
    assert set(body) == {"error"}
    assert body["error"]["code"] == code
    assert isinstance(body["error"]["message"], str)


@pytest.fixture
def client(workspace):
    with make_client(workspace) as c:
        yield c


@pytest.fixture
def uploaded(client):
    response = client.post("/v1/scans", json=scan_records())
    assert response.status_code == 200
    return response.json()


class TestScans:
    def test_upload_accepts_batch(self, client):
        response = client.post("/v1/scans", json=scan_records())
        assert response.status_code == 200
        body = response.json()
        assert body["accepted"] == 12
        assert body["skipped"] == 0
        assert isinstance(body["scan_id"], str) and body["scan_id"]

    def test_second_upload_skips_duplicates(self, client):
        client.post("/v1/scans", json=scan_records())
        body = client.post("/v1/scans", json=scan_records()).json()
        assert body["accepted"] == 0
        assert body["skipped"] == 12

    def test_non_array_rejected(self, client):
        response = client.post("/v1/scans", json={"not": "an array"})
        assert_envelope(response, 400, "SCHEMA_VIOLATION")

    def test_empty_array_rejected(self, client):
        response = client.post("/v1/scans", json=[])
        assert_envelope(response, 400, "EMPTY_BATCH")

    def test_invalid_json_rejected(self, client):
        response = client.post("/v1/scans", content=b"{oops",
                               headers={"content-type": "application/json"})
        assert_envelope(response, 400, "SCHEMA_VIOLATION")

    def test_bad_record_reports_index_and_field(self, client):
        records = scan_records()
        del records[3]["bssid"]
        response = client.post("/v1/scans", json=records)
        assert_envelope(response, 400, "SCHEMA_VIOLATION")
        details = response.json()["error"]["details"]
        assert details["field"] == "bssid"
        assert details["index"] == 3

    def test_future_timestamp_rejected(self, client):
        record = observation_to_dict(make_observation())
        record["observed_at"] = "2025-06-03T12:00:00Z"  # two days past NOW
        response = client.post("/v1/scans", json=[record])
        assert_envelope(response, 400, "SCHEMA_VIOLATION")

    def test_oversized_body_rejected(self, client):
        response = client.post(
            "/v1/scans", content=b"x",
            headers={"content-type": "application/json",
                     "content-length": str(MAX_BODY_BYTES + 1)})
        assert_envelope(response, 413, "TOO_LARGE")


class TestAssessment:
    def test_matches_golden_document(self, client, uploaded):
        response = client.get(
            f"/v1/scans/{uploaded['scan_id']}/assessment?posture=balanced")
        assert response.status_code == 200
        golden = (FIXTURES / "golden" / "assessment_balanced.json").read_bytes()
        assert response.content == golden

    def test_posture_defaults_to_balanced(self, client, uploaded):
        explicit = client.get(
            f"/v1/scans/{uploaded['scan_id']}/assessment?posture=balanced")
        implicit = client.get(f"/v1/scans/{uploaded['scan_id']}/assessment")
        assert implicit.content == explicit.content

    def test_all_three_postures_match_goldens(self, client, uploaded):
        for posture in ("conservative", "balanced", "permissive"):
            response = client.get(
                f"/v1/scans/{uploaded['scan_id']}/assessment?posture={posture}")
            golden = (FIXTURES / "golden" /
                      f"assessment_{posture}.json").read_bytes()
            assert response.content == golden, posture

    def test_unknown_scan_404(self, client):
        response = client.get("/v1/scans/deadbeef/assessment")
        assert_envelope(response, 404, "NOT_FOUND")

    def test_unknown_posture_400(self, client, uploaded):
        response = client.get(
            f"/v1/scans/{uploaded['scan_id']}/assessment?posture=reckless")
        assert_envelope(response, 400, "SCHEMA_VIOLATION")


class TestHistory:
    def test_page_shape(self, client, uploaded):
        response = client.get("/v1/aps/00:14:22:77:88:99/history?limit=2")
        assert response.status_code == 200
        body = response.json()
        assert body["bssid"] == "00:14:22:77:88:99"
        assert body["total"] == 5  # four seeded plus the uploaded sighting
        assert body["limit"] == 2 and body["offset"] == 0
        assert len(body["records"]) == 2
        newest = body["records"][0]
        assert newest["observed_at"] == "2025-06-01T11:55:00Z"

    def test_unknown_bssid_is_empty_page(self, client):
        body = client.get("/v1/aps/de:ad:be:ef:00:01/history").json()
        assert body["total"] == 0
        assert body["records"] == []

    def test_malformed_bssid_400(self, client):
        response = client.get("/v1/aps/not-a-mac/history")
        assert_envelope(response, 400, "MALFORMED")

    def test_multicast_bssid_400(self, client):
        response = client.get("/v1/aps/01:00:5e:00:00:01/history")
        assert_envelope(response, 400, "MULTICAST_ADDRESS")

    def test_bad_paging_400(self, client):
        assert_envelope(client.get("/v1/aps/00:14:22:77:88:99/history?limit=x"),
                        400, "SCHEMA_VIOLATION")
        assert_envelope(client.get("/v1/aps/00:14:22:77:88:99/history?offset=-1"),
                        400, "SCHEMA_VIOLATION")


class TestFeedback:
    VALID = {
        "bssid": "00:14:22:0a:0b:0c",
        "ssid": "CoffeeShack",
        "category": "NO_INTERNET",
        "observed_at": "2025-06-01T11:00:00Z",
        "reporter_id": "tester-9",
    }

    def test_accepted_and_echoed(self, client):
        response = client.post("/v1/feedback", json=self.VALID)
        assert response.status_code == 200
        body = response.json()
        assert body["accepted"] is True
        assert body["report"] == self.VALID

    def test_persisted_to_store(self, client, workspace):
        client.post("/v1/feedback", json=self.VALID)
        stored = (workspace / "feedback.jsonl").read_text().splitlines()[-1]
        assert json.loads(stored) == self.VALID

    def test_influences_next_assessment(self, client):
        # feedback posted before upload shifts the community signal
        for reporter in ("r1", "r2"):
            record = dict(self.VALID, reporter_id=reporter)
            assert client.post("/v1/feedback", json=record).status_code == 200
        scan_id = client.post("/v1/scans", json=scan_records()).json()["scan_id"]
        document = client.get(f"/v1/scans/{scan_id}/assessment").json()
        entry = next(e for e in document
                     if e["observation"]["bssid"] == "00:14:22:0a:0b:0c")
        assert entry["community"]["n_reports"] == 4  # two seeded, two new

    def test_unknown_category_400(self, client):
        response = client.post("/v1/feedback",
                               json=dict(self.VALID, category="MEH"))
        assert_envelope(response, 400, "SCHEMA_VIOLATION")
        assert response.json()["error"]["details"]["field"] == "category"

    def test_future_timestamp_400(self, client):
        record = dict(self.VALID, observed_at="2025-06-02T12:00:00Z")
        response = client.post("/v1/feedback", json=record)
        assert_envelope(response, 400, "FUTURE_TIMESTAMP")

    def test_non_object_400(self, client):
        response = client.post("/v1/feedback", json=[1, 2])
        assert_envelope(response, 400, "SCHEMA_VIOLATION")


class TestBaselines:
    def test_dns_served_verbatim(self, client):
        response = client.get("/v1/baselines/dns")
        assert response.status_code == 200
        assert response.content == (FIXTURES / "baselines" / "dns.json").read_bytes()

    def test_tls_served_verbatim(self, client):
        response = client.get("/v1/baselines/tls")
        assert response.content == (FIXTURES / "baselines" / "tls.json").read_bytes()

    def test_unknown_kind_404(self, client):
        assert_envelope(client.get("/v1/baselines/ntp"), 404, "NOT_FOUND")

    def test_unconfigured_404(self, workspace):
        with make_client(workspace, baselines_dir=None) as bare:
            assert_envelope(bare.get("/v1/baselines/dns"), 404, "NOT_FOUND")

    def test_malformed_operator_file_fails_startup(self, workspace, tmp_path):
        bad_dir = tmp_path / "bad-baselines"
        bad_dir.mkdir()
        (bad_dir / "dns.json").write_text("{broken")
        with pytest.raises(ConfigError):
            create_app(ServiceConfig(db_path=workspace / "history.jsonl",
                                     baselines_dir=bad_dir))


class TestProbes:
    def probe_payload(self):
        return {
            "bssid": "00:14:22:0a:0b:0c",
            "started_at": NOW_TEXT,
            "dns": {"canary-a.example.com": {
                "verdict": "MISMATCH", "resolved": ["203.0.113.5"]}},
            "tls": {"pinned-a.example.com:443": {
                "verdict": "PIN_OK", "observed_spki": "abc"}},
            "portal": {"verdict": "NO_PORTAL", "status_code": 204},
        }

    def test_flags_returned(self, client):
        response = client.post("/v1/probes", json=self.probe_payload())
        assert response.status_code == 200
        body = response.json()
        assert body["bssid"] == "00:14:22:0a:0b:0c"
        assert [f["code"] for f in body["flags"]] == ["PROBE_DNS_TAMPER"]

    def test_result_feeds_assessment(self, client):
        client.post("/v1/probes", json=self.probe_payload())
        scan_id = client.post("/v1/scans", json=scan_records()).json()["scan_id"]
        document = client.get(f"/v1/scans/{scan_id}/assessment").json()
        entry = next(e for e in document
                     if e["observation"]["bssid"] == "00:14:22:0a:0b:0c")
        assert "PROBE_DNS_TAMPER" in [f["code"] for f in entry["flags"]]
        assert entry["verdict"]["decision"] == "AVOID"

    def test_bad_shape_400(self, client):
        payload = self.probe_payload()
        payload["portal"] = {"verdict": "MAYBE"}
        assert_envelope(client.post("/v1/probes", json=payload),
                        400, "SCHEMA_VIOLATION")


class TestWigleEndpoint:
    def test_not_configured_503(self, client):
        response = client.get("/v1/wigle/10:20:30:40:50:60")
        assert_envelope(response, 503, "NOT_CONFIGURED")

    def test_fixture_lookup_no_history(self, workspace):
        with make_client(workspace,
                         wigle_fixtures=FIXTURES / "wigle") as wigle_client:
            body = wigle_client.get("/v1/wigle/10:20:30:40:50:60").json()
        assert body["status"] == "FOUND"
        assert body["detail"]["ssid"] == "CafeNet"
        assert body["compared_against"] is None

    def test_fixture_lookup_unknown(self, workspace):
        with make_client(workspace,
                         wigle_fixtures=FIXTURES / "wigle") as wigle_client:
            body = wigle_client.get("/v1/wigle/10:20:30:40:50:64").json()
        assert body["status"] == "UNKNOWN_TO_WIGLE"
        assert body["detail"] is None

    def test_compares_against_latest_history(self, workspace):
        with make_client(workspace,
                         wigle_fixtures=FIXTURES / "wigle") as wigle_client:
            records = [json.loads(line) for line in
                       (FIXTURES / "wigle_scan.jsonl").read_text().splitlines()]
            assert wigle_client.post("/v1/scans", json=records).status_code == 200
            body = wigle_client.get("/v1/wigle/10:20:30:40:50:61").json()
        assert body["status"] == "SECURITY_MISMATCH"
        assert body["compared_against"] == "2025-06-01T11:45:00Z"

    def test_upstream_failure_502(self, workspace):
        with make_client(workspace,
                         wigle_fixtures=FIXTURES / "wigle") as wigle_client:
            from wificue.wigle import WigleClient

            def broken_transport(url, *, auth, timeout=15.0):
                return 429, ""

            wigle_client.app.state.ctx.wigle = WigleClient.live(
                "n", "t", transport=broken_transport)
            response = wigle_client.get("/v1/wigle/10:20:30:40:50:60")
        assert_envelope(response, 502, "QUOTA_EXCEEDED")


class TestAuth:
    @pytest.fixture
    def secured(self, workspace):
        with make_client(workspace, api_token="sesame") as c:
            yield c

    ENDPOINTS = [
        ("post", "/v1/scans"),
        ("get", "/v1/scans/x/assessment"),
        ("get", "/v1/aps/00:14:22:0a:0b:0c/history"),
        ("post", "/v1/feedback"),
        ("get", "/v1/baselines/dns"),
        ("post", "/v1/probes"),
        ("get", "/v1/wigle/00:14:22:0a:0b:0c"),
    ]

    @pytest.mark.parametrize("method, path", ENDPOINTS)
    def test_missing_token_401(self, secured, method, path):
        response = getattr(secured, method)(path)
        assert_envelope(response, 401, "UNAUTHORIZED")

    @pytest.mark.parametrize("method, path", ENDPOINTS)
    def test_wrong_token_401(self, secured, method, path):
        response = getattr(secured, method)(
            path, headers={"authorization": "Bearer wrong"})
        assert_envelope(response, 401, "UNAUTHORIZED")

    def test_correct_token_passes(self, secured):
        response = secured.post("/v1/scans", json=scan_records(),
                                headers={"authorization": "Bearer sesame"})
        assert response.status_code == 200

    def test_no_token_configured_is_open(self, client):
        assert client.post("/v1/scans", json=scan_records()).status_code == 200


class TestEnvelopeEverywhere:
    def test_unknown_path_404_envelope(self, client):
        assert_envelope(client.get("/v1/nonsense"), 404, "NOT_FOUND")

    def test_wrong_method_405_envelope(self, client):
        assert_envelope(client.get("/v1/scans"), 405, "METHOD_NOT_ALLOWED")

    def test_internal_errors_wrapped(self, client, monkeypatch):
        def explode(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr("wificue.service.pipeline.assess_batch", explode)
        scan_id = client.post("/v1/scans", json=scan_records()).json()["scan_id"]
        response = client.get(f"/v1/scans/{scan_id}/assessment")
        assert_envelope(response, 500, "INTERNAL")
