"""HTTP service exposing ingest, assessment, history, feedback, and probes.

Every response body is JSON rendered by the shared canonical serializer, and
every non-2xx body is an error envelope: {"error": {"code", "message", ...}}.
Endpoints avoid framework request models on purpose: bodies are validated by
the same wire-format functions the CLI uses, so both surfaces agree.
"""

from __future__ import annotations

import hmac
import logging
import os
from dataclasses import dataclass, field as dataclass_field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Optional, Union

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import pipeline
from .errors import (
    ConfigError,
    EmptyBatch,
    FutureTimestamp,
    SchemaViolation,
    StorageIO,
    WifiCueError,
    WigleError,
)
from .feedback import FeedbackStore, report_from_dict, report_to_dict
from .history import HistoryStore
from .ingest import ScanBatch, make_batch, normalize
from .model import (
    Bssid,
    MalformedBssid,
    MulticastBssid,
    format_rfc3339,
    observation_from_dict,
    observation_to_dict,
    parse_bssid,
    utc_now,
)
from .oui import OuiRegistry, load_registry_file
from .probe import ProbeResult, probe_flags, probe_result_from_dict
from .recommend import DEFAULT_SCORING, RiskPosture, ScoringConfig
from .wigle import WigleClient, compare

log = logging.getLogger(__name__)

MAX_BODY_BYTES = 5 * 1024 * 1024

ENV_API_TOKEN = "WIFICUE_API_TOKEN"
ENV_WIGLE_NAME = "WIFICUE_WIGLE_API_NAME"
ENV_WIGLE_TOKEN = "WIFICUE_WIGLE_API_TOKEN"


class ApiFault(Exception):
    """Carries an HTTP status plus a stable error code to the envelope layer."""

    def __init__(self, status: int, code: str, message: str,
                 details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details or {}


def _envelope(status: int, code: str, message: str,
              details: Optional[dict[str, Any]] = None) -> Response:
    body: dict[str, Any] = {"error": {"code": code, "message": message}}
    if details:
        body["error"]["details"] = details
    return Response(content=pipeline.render_json(body), status_code=status,
                    media_type="application/json")


def _ok(payload: Any, status: int = 200) -> Response:
    return Response(content=pipeline.render_json(payload), status_code=status,
                    media_type="application/json")


@dataclass
class ServiceConfig:
    """Startup configuration; env vars fill anything not passed explicitly."""

    db_path: Union[str, Path]
    oui_path: Optional[Union[str, Path]] = None
    deny_path: Optional[Union[str, Path]] = None
    baselines_dir: Optional[Union[str, Path]] = None
    wigle_fixtures: Optional[Union[str, Path]] = None
    api_token: Optional[str] = None
    scoring: ScoringConfig = dataclass_field(default_factory=lambda: DEFAULT_SCORING)
    now_override: Optional[datetime] = None
    ui_dir: Optional[Union[str, Path]] = None


class ServiceState:
    """Everything the handlers need, built once at startup."""

    def __init__(self, config: ServiceConfig):
        workspace = pipeline.Workspace.at(config.db_path)
        self.history = HistoryStore(workspace.history_path)
        self.feedback = FeedbackStore(workspace.feedback_path)
        self.registry: Optional[OuiRegistry] = None
        oui_path = Path(config.oui_path) if config.oui_path else workspace.oui_path
        if oui_path.exists():
            self.registry = load_registry_file(oui_path)
        self.deny_list: frozenset[str] = frozenset()
        deny_path = Path(config.deny_path) if config.deny_path else workspace.deny_path
        if deny_path.exists():
            self.deny_list = pipeline.load_deny_list(deny_path)
        self.wigle: Optional[WigleClient] = None
        if config.wigle_fixtures:
            self.wigle = WigleClient.fixture(
                config.wigle_fixtures, cache_dir=workspace.wigle_cache_dir)
        else:
            name = os.environ.get(ENV_WIGLE_NAME)
            token = os.environ.get(ENV_WIGLE_TOKEN)
            if name and token:
                self.wigle = WigleClient.live(
                    name, token, cache_dir=workspace.wigle_cache_dir)
        self.api_token = (config.api_token
                          if config.api_token is not None
                          else os.environ.get(ENV_API_TOKEN))
        self.scoring = config.scoring
        self.scans: dict[str, ScanBatch] = {}
        self.probes: dict[Bssid, ProbeResult] = {}
        self.baselines: dict[str, str] = {}
        if config.baselines_dir:
            self._load_baselines(Path(config.baselines_dir))
        if config.now_override is not None:
            fixed = config.now_override
            self.clock: Callable[[], datetime] = lambda: fixed
        else:
            self.clock = utc_now

    def _load_baselines(self, directory: Path) -> None:
        # fail fast: a malformed operator file must stop startup, not surface
        # as a 500 later
        from .probe import load_dns_baseline, load_tls_pins

        dns_path = directory / "dns.json"
        tls_path = directory / "tls.json"
        if dns_path.exists():
            text = dns_path.read_text(encoding="utf-8")
            load_dns_baseline(text)
            self.baselines["dns"] = text
        if tls_path.exists():
            text = tls_path.read_text(encoding="utf-8")
            load_tls_pins(text)
            self.baselines["tls"] = text


async def _read_body(request: Request) -> bytes:
    declared = request.headers.get("content-length")
    if declared is not None:
        try:
            if int(declared) > MAX_BODY_BYTES:
                raise ApiFault(413, "TOO_LARGE",
                               f"request body exceeds {MAX_BODY_BYTES} bytes")
        except ValueError:
            raise ApiFault(400, "SCHEMA_VIOLATION",
                           "content-length is not an integer") from None
    body = await request.body()
    if len(body) > MAX_BODY_BYTES:
        raise ApiFault(413, "TOO_LARGE",
                       f"request body exceeds {MAX_BODY_BYTES} bytes")
    return body


def _parse_json_body(body: bytes) -> Any:
    import json

    try:
        return json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ApiFault(400, "SCHEMA_VIOLATION",
                       f"request body is not valid JSON: {exc}") from None


def _posture_from_query(value: Optional[str]) -> RiskPosture:
    if value is None:
        return RiskPosture.BALANCED
    try:
        return RiskPosture(value.lower())
    except ValueError:
        raise ApiFault(400, "SCHEMA_VIOLATION",
                       f"unknown posture {value!r}; expected conservative, "
                       "balanced, or permissive") from None


def _bssid_from_path(text: str) -> Bssid:
    try:
        return parse_bssid(text)
    except MalformedBssid as exc:
        raise ApiFault(400, "MALFORMED", str(exc)) from None
    except MulticastBssid as exc:
        raise ApiFault(400, "MULTICAST_ADDRESS", str(exc)) from None


def _int_query(value: Optional[str], name: str, default: int) -> int:
    if value is None:
        return default
    try:
        parsed = int(value)
    except ValueError:
        raise ApiFault(400, "SCHEMA_VIOLATION",
                       f"{name} must be an integer") from None
    if parsed < 0:
        raise ApiFault(400, "SCHEMA_VIOLATION", f"{name} must be >= 0")
    return parsed


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the service; raises ConfigError on malformed operator files."""
    try:
        state = ServiceState(config)
    except (ConfigError, StorageIO):
        raise
    except WifiCueError as exc:
        raise ConfigError(f"cannot start service: {exc}") from None

    app = FastAPI(title="wificue", openapi_url=None, docs_url=None,
                  redoc_url=None)
    app.state.ctx = state
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def require_auth(request: Request) -> None:
        if state.api_token is None:
            return
        header = request.headers.get("authorization", "")
        expected = f"Bearer {state.api_token}"
        if not hmac.compare_digest(header.encode(), expected.encode()):
            raise ApiFault(401, "UNAUTHORIZED",
                           "missing or invalid bearer token")

    @app.exception_handler(ApiFault)
    async def handle_fault(_request: Request, exc: ApiFault) -> Response:
        return _envelope(exc.status, exc.code, exc.message, exc.details)

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_exception(_request: Request,
                                    exc: StarletteHTTPException) -> Response:
        code = {401: "UNAUTHORIZED", 404: "NOT_FOUND",
                405: "METHOD_NOT_ALLOWED", 413: "TOO_LARGE"}.get(
                    exc.status_code, "HTTP_ERROR")
        return _envelope(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_request: Request,
                                exc: RequestValidationError) -> Response:
        return _envelope(400, "SCHEMA_VIOLATION", "invalid request")

    @app.exception_handler(Exception)
    async def handle_crash(_request: Request, exc: Exception) -> Response:
        log.exception("unhandled error: %s", exc)
        return _envelope(500, "INTERNAL", "internal error")

    @app.post("/v1/scans")
    async def post_scans(request: Request) -> Response:
        require_auth(request)
        body = await _read_body(request)
        payload = _parse_json_body(body)
        if not isinstance(payload, list):
            raise ApiFault(400, "SCHEMA_VIOLATION",
                           "scan upload must be a JSON array of records")
        if not payload:
            raise ApiFault(400, "EMPTY_BATCH", "scan upload contains no records")
        now = state.clock()
        observations = []
        for index, record in enumerate(payload):
            try:
                observations.append(
                    observation_from_dict(record, line_no=index + 1, now=now))
            except SchemaViolation as exc:
                raise ApiFault(400, "SCHEMA_VIOLATION", exc.message,
                               details={k: v for k, v in
                                        (("field", exc.field),
                                         ("index", index)) if v is not None}
                               ) from None
        batch = normalize(make_batch(observations, ingested_at=now))
        appended = state.history.append(batch)
        state.scans[batch.scan_id] = batch
        return _ok({
            "scan_id": batch.scan_id,
            "accepted": appended,
            "skipped": len(batch.observations) - appended,
        })

    @app.get("/v1/scans/{scan_id}/assessment")
    async def get_assessment(scan_id: str, request: Request) -> Response:
        require_auth(request)
        batch = state.scans.get(scan_id)
        if batch is None:
            raise ApiFault(404, "NOT_FOUND", f"unknown scan {scan_id!r}")
        posture = _posture_from_query(request.query_params.get("posture"))
        now = state.clock()
        entries = pipeline.assess_batch(
            batch, posture=posture, now=now, history=state.history,
            feedback=state.feedback, registry=state.registry,
            deny_list=state.deny_list, wigle=state.wigle,
            probes=state.probes, scoring=state.scoring)
        document = pipeline.render_assessment(entries)
        return Response(content=document, media_type="application/json")

    @app.get("/v1/aps/{bssid}/history")
    async def get_history(bssid: str, request: Request) -> Response:
        require_auth(request)
        parsed = _bssid_from_path(bssid)
        limit = _int_query(request.query_params.get("limit"), "limit", 50)
        offset = _int_query(request.query_params.get("offset"), "offset", 0)
        page = state.history.history(parsed, limit=limit, offset=offset)
        return _ok({
            "bssid": str(page.bssid),
            "total": page.total,
            "limit": page.limit,
            "offset": page.offset,
            "records": [observation_to_dict(r) for r in page.records],
        })

    @app.post("/v1/feedback")
    async def post_feedback(request: Request) -> Response:
        require_auth(request)
        body = await _read_body(request)
        payload = _parse_json_body(body)
        try:
            report = report_from_dict(payload, now=state.clock())
        except SchemaViolation as exc:
            raise ApiFault(400, "SCHEMA_VIOLATION", exc.message,
                           details={"field": exc.field} if exc.field else {}
                           ) from None
        except FutureTimestamp as exc:
            raise ApiFault(400, "FUTURE_TIMESTAMP", exc.message) from None
        state.feedback.append(report)
        return _ok({"accepted": True, "report": report_to_dict(report)})

    @app.get("/v1/baselines/{kind}")
    async def get_baseline(kind: str, request: Request) -> Response:
        require_auth(request)
        if kind not in ("dns", "tls"):
            raise ApiFault(404, "NOT_FOUND", f"unknown baseline {kind!r}")
        text = state.baselines.get(kind)
        if text is None:
            raise ApiFault(404, "NOT_FOUND",
                           f"no {kind} baseline is configured")
        # operator file bytes are served verbatim so probe clients hash-match
        return Response(content=text, media_type="application/json")

    @app.post("/v1/probes")
    async def post_probes(request: Request) -> Response:
        require_auth(request)
        body = await _read_body(request)
        payload = _parse_json_body(body)
        try:
            result = probe_result_from_dict(payload)
        except SchemaViolation as exc:
            raise ApiFault(400, "SCHEMA_VIOLATION", exc.message,
                           details={"field": exc.field} if exc.field else {}
                           ) from None
        state.probes[result.bssid] = result
        flags = probe_flags(result)
        return _ok({
            "bssid": str(result.bssid),
            "flags": [pipeline.flag_to_dict(f) for f in flags],
        })

    @app.get("/v1/wigle/{bssid}")
    async def get_wigle(bssid: str, request: Request) -> Response:
        require_auth(request)
        parsed = _bssid_from_path(bssid)
        if state.wigle is None:
            raise ApiFault(503, "NOT_CONFIGURED",
                           "no lookup credentials or fixtures are configured")
        try:
            detail = state.wigle.lookup(parsed)
        except WigleError as exc:
            raise ApiFault(502, exc.code, exc.message) from None
        detail_dict = None
        if detail is not None:
            detail_dict = {
                "netid": str(detail.netid),
                "ssid": detail.ssid,
                "encryption": detail.encryption,
                "trilat": detail.trilat,
                "trilong": detail.trilong,
                "last_update": (format_rfc3339(detail.last_update)
                                if detail.last_update else None),
            }
        latest = state.history.full_history(parsed).latest
        if latest is not None:
            finding = compare(detail, latest)
            return _ok({
                "bssid": str(parsed),
                "status": finding.status.value,
                "detail": detail_dict,
                "distance_km": finding.distance_km,
                "compared_against": format_rfc3339(latest.observed_at),
            })
        status = "FOUND" if detail is not None else "UNKNOWN_TO_WIGLE"
        return _ok({
            "bssid": str(parsed),
            "status": status,
            "detail": detail_dict,
            "distance_km": None,
            "compared_against": None,
        })

    if config.ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.ui_dir), html=True),
                  name="ui")

    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1",
          port: int = 8640) -> None:  # pragma: no cover - thin uvicorn wrapper
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="info")
