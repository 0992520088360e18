"""Command-line interface.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 assessment found at
least one AVOID verdict.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

from . import pipeline
from .errors import ConfigError, WifiCueError
from .feedback import FeedbackStore, report_to_dict
from .history import HistoryStore
from .ingest import make_batch, normalize, parse_airodump_csv, parse_canonical
from .model import format_rfc3339, parse_bssid, parse_rfc3339, utc_now
from .oui import load_registry_file
from .probe import (
    load_dns_baseline,
    load_tls_pins,
    probe_flags,
    probe_result_to_dict,
    run_probe,
    system_http_fetcher,
    system_resolver,
    system_tls_connector,
)
from .recommend import (
    DEFAULT_SCORING,
    Decision,
    FeedbackCategory,
    FeedbackReport,
    RiskPosture,
    ScoringConfig,
)
from .service import ServiceConfig, serve
from .wigle import WigleClient

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_AVOID = 3

ENV_DB = "WIFICUE_DB"

PROBE_WARNING = (
    "WARNING: probes send real traffic over the network under test. A hostile\n"
    "access point can observe, redirect, or tamper with that traffic and can\n"
    "fingerprint this device. Re-run with --i-understand-the-risk to proceed."
)


class UsageError(Exception):
    """Input contract violations that are the caller's fault (exit 2)."""


def _add_now_argument(parser: argparse.ArgumentParser) -> None:
    # deterministic-clock override for reproducible output; hidden on purpose
    parser.add_argument("--now", default=None, help=argparse.SUPPRESS)


def _resolve_now(args: argparse.Namespace) -> datetime:
    if getattr(args, "now", None):
        try:
            return parse_rfc3339(args.now)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return utc_now()


def _resolve_db(args: argparse.Namespace, *, required: bool) -> Optional[Path]:
    raw = getattr(args, "db", None) or os.environ.get(ENV_DB)
    if raw:
        return Path(raw)
    if required:
        raise UsageError("no history store: pass --db or set WIFICUE_DB")
    return None


def _read_scan_file(path: str, fmt: str, *, lenient: bool, now: datetime):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise WifiCueError(f"cannot read scan file: {exc}") from None
    if fmt == "airodump":
        return parse_airodump_csv(lines, strict=not lenient, now=now)
    return parse_canonical(lines, strict=not lenient, now=now)


def _load_workspace(args: argparse.Namespace, db_path: Optional[Path]):
    """Open the stores and side files for assessment-style commands."""
    history = feedback = None
    registry = None
    deny_list: frozenset[str] = frozenset()
    if db_path is not None:
        workspace = pipeline.Workspace.at(db_path)
        history = HistoryStore(workspace.history_path)
        feedback = FeedbackStore(workspace.feedback_path)
        oui_path = Path(getattr(args, "oui", None) or workspace.oui_path)
        if oui_path.exists():
            registry = load_registry_file(oui_path)
        deny_path = Path(getattr(args, "deny_list", None) or workspace.deny_path)
        if deny_path.exists():
            deny_list = pipeline.load_deny_list(deny_path)
    else:
        explicit_oui = getattr(args, "oui", None)
        if explicit_oui:
            registry = load_registry_file(explicit_oui)
        explicit_deny = getattr(args, "deny_list", None)
        if explicit_deny:
            deny_list = pipeline.load_deny_list(explicit_deny)
    return history, feedback, registry, deny_list


def cmd_ingest(args: argparse.Namespace) -> int:
    now = _resolve_now(args)
    db_path = _resolve_db(args, required=True)
    report = _read_scan_file(args.scan_file, args.format,
                             lenient=args.lenient, now=now)
    batch = normalize(make_batch(report.observations, ingested_at=now))
    with HistoryStore(db_path) as store:
        appended = store.append(batch)
    skipped = report.skipped + (len(batch.observations) - appended) \
        + (len(report.observations) - len(batch.observations))
    print(f"accepted {appended} skipped {skipped}")
    return EXIT_OK


def _format_table(entries) -> str:
    rows = [("VERDICT", "SCORE", "SSID", "BSSID", "FLAGS")]
    for entry in entries:
        obs = entry.observation
        ssid = obs.ssid.display if not obs.ssid.hidden else "<hidden>"
        top = ",".join(f.code for f in entry.flag_set.flags[:3])
        rows.append((entry.verdict.decision.name,
                     f"{entry.verdict.score:.2f}", ssid, str(obs.bssid), top))
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = []
    for row in rows:
        cells = [row[i].ljust(widths[i]) for i in range(4)] + [row[4]]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def cmd_assess(args: argparse.Namespace) -> int:
    now = _resolve_now(args)
    db_path = _resolve_db(args, required=False)
    report = _read_scan_file(args.scan_file, args.format,
                             lenient=args.lenient, now=now)
    if not report.observations:
        raise UsageError("scan file contains no observations")
    batch = normalize(make_batch(report.observations, ingested_at=now))
    history, feedback, registry, deny_list = _load_workspace(args, db_path)
    wigle_client = None
    if args.wigle_fixtures:
        cache_dir = (pipeline.Workspace.at(db_path).wigle_cache_dir
                     if db_path else None)
        wigle_client = WigleClient.fixture(args.wigle_fixtures,
                                           cache_dir=cache_dir)
    scoring = (ScoringConfig.from_file(args.scoring)
               if args.scoring else DEFAULT_SCORING)
    try:
        entries = pipeline.assess_batch(
            batch, posture=RiskPosture(args.posture), now=now,
            history=history, feedback=feedback, registry=registry,
            deny_list=deny_list, wigle=wigle_client, scoring=scoring)
    finally:
        if history:
            history.close()
        if feedback:
            feedback.close()
    if args.output == "json":
        sys.stdout.write(pipeline.render_assessment(entries))
    else:
        sys.stdout.write(_format_table(entries))
    if any(e.verdict.decision is Decision.AVOID for e in entries):
        return EXIT_AVOID
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    db_path = _resolve_db(args, required=True)
    now_override = None
    if args.now:
        try:
            now_override = parse_rfc3339(args.now)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    host, _, port_text = args.listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise UsageError(f"--listen must be host:port, got {args.listen!r}")
    scoring = (ScoringConfig.from_file(args.scoring)
               if args.scoring else DEFAULT_SCORING)
    config = ServiceConfig(
        db_path=db_path, oui_path=args.oui, deny_path=args.deny_list,
        baselines_dir=args.baselines, wigle_fixtures=args.wigle_fixtures,
        scoring=scoring, now_override=now_override, ui_dir=args.ui)
    serve(config, host=host, port=int(port_text))
    return EXIT_OK


def cmd_oui_update(args: argparse.Namespace) -> int:
    db_path = _resolve_db(args, required=True)
    registry = load_registry_file(args.manuf_file, strict=not args.lenient)
    workspace = pipeline.Workspace.at(db_path)
    workspace.oui_path.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(args.manuf_file, workspace.oui_path)
    print(f"loaded {len(registry)} entries (version {registry.source_version})")
    return EXIT_OK


def cmd_feedback_add(args: argparse.Namespace) -> int:
    now = _resolve_now(args)
    db_path = _resolve_db(args, required=True)
    observed_at = now
    if args.observed_at:
        try:
            observed_at = parse_rfc3339(args.observed_at)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if observed_at > now:
        raise UsageError("observed_at is in the future")
    report = FeedbackReport(
        bssid=parse_bssid(args.bssid), ssid=args.ssid,
        category=FeedbackCategory(args.category),
        observed_at=observed_at, reporter_id=args.reporter)
    workspace = pipeline.Workspace.at(db_path)
    with FeedbackStore(workspace.feedback_path) as store:
        store.append(report)
    print(f"recorded {args.category} for {report.bssid}")
    return EXIT_OK


def cmd_wigle_lookup(args: argparse.Namespace) -> int:
    now = _resolve_now(args)
    bssid = parse_bssid(args.bssid)
    db_path = _resolve_db(args, required=False)
    cache_dir = pipeline.Workspace.at(db_path).wigle_cache_dir if db_path else None
    if args.offline_fixtures:
        client = WigleClient.fixture(args.offline_fixtures, cache_dir=cache_dir)
    else:
        name = os.environ.get("WIFICUE_WIGLE_API_NAME")
        token = os.environ.get("WIFICUE_WIGLE_API_TOKEN")
        if not (name and token):
            raise UsageError(
                "no lookup credentials: set WIFICUE_WIGLE_API_NAME and "
                "WIFICUE_WIGLE_API_TOKEN, or pass --offline-fixtures")
        client = WigleClient.live(name, token, cache_dir=cache_dir)
    detail = client.lookup(bssid)
    payload = {
        "bssid": str(bssid),
        "found": detail is not None,
        "detail": None,
    }
    if detail is not None:
        payload["detail"] = {
            "netid": str(detail.netid),
            "ssid": detail.ssid,
            "encryption": detail.encryption,
            "trilat": detail.trilat,
            "trilong": detail.trilong,
            "last_update": (format_rfc3339(detail.last_update)
                            if detail.last_update else None),
        }
    sys.stdout.write(pipeline.render_json(payload))
    return EXIT_OK


def cmd_probe(args: argparse.Namespace) -> int:
    now = _resolve_now(args)
    if not args.i_understand_the_risk:
        print(PROBE_WARNING, file=sys.stderr)
        return EXIT_USAGE
    baselines = Path(args.baselines)
    dns_path = baselines / "dns.json"
    tls_path = baselines / "tls.json"
    if not dns_path.exists() or not tls_path.exists():
        raise ConfigError(f"baselines dir {baselines} needs dns.json and tls.json")
    baseline = load_dns_baseline(dns_path.read_text(encoding="utf-8"))
    pins = load_tls_pins(tls_path.read_text(encoding="utf-8"))
    bssid = parse_bssid(args.bssid)
    result = run_probe(
        bssid, baseline, pins,
        resolver=system_resolver, connector=system_tls_connector,
        fetcher=system_http_fetcher, portal_url=args.portal_url, now=now)
    flags = probe_flags(result)
    payload = {
        "result": probe_result_to_dict(result),
        "flags": [pipeline.flag_to_dict(f) for f in flags],
    }
    sys.stdout.write(pipeline.render_json(payload))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wificue",
        description="Assess the risk of nearby Wi-Fi access points")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="append a scan file to the history store")
    ingest.add_argument("scan_file")
    ingest.add_argument("--format", choices=("canonical", "airodump"),
                        default="canonical")
    ingest.add_argument("--db", default=None,
                        help="history store path (or WIFICUE_DB)")
    ingest.add_argument("--lenient", action="store_true",
                        help="skip bad records instead of aborting")
    _add_now_argument(ingest)
    ingest.set_defaults(func=cmd_ingest)

    assess = sub.add_parser("assess", help="assess a scan file and print verdicts")
    assess.add_argument("scan_file")
    assess.add_argument("--format", choices=("canonical", "airodump"),
                        default="canonical")
    assess.add_argument("--posture",
                        choices=tuple(p.value for p in RiskPosture),
                        default=RiskPosture.BALANCED.value)
    assess.add_argument("--output", choices=("table", "json"), default="table")
    assess.add_argument("--db", default=None)
    assess.add_argument("--oui", default=None, help="vendor registry file")
    assess.add_argument("--deny-list", dest="deny_list", default=None)
    assess.add_argument("--wigle-fixtures", dest="wigle_fixtures", default=None)
    assess.add_argument("--scoring", default=None,
                        help="scoring config JSON overrides")
    assess.add_argument("--lenient", action="store_true")
    _add_now_argument(assess)
    assess.set_defaults(func=cmd_assess)

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--listen", default="127.0.0.1:8640")
    srv.add_argument("--db", default=None)
    srv.add_argument("--oui", default=None)
    srv.add_argument("--deny-list", dest="deny_list", default=None)
    srv.add_argument("--baselines", default=None,
                     help="directory holding dns.json / tls.json")
    srv.add_argument("--wigle-fixtures", dest="wigle_fixtures", default=None)
    srv.add_argument("--scoring", default=None)
    srv.add_argument("--ui", default=None, help="static frontend directory")
    _add_now_argument(srv)
    srv.set_defaults(func=cmd_serve)

    probe = sub.add_parser("probe", help="run post-connection network probes")
    probe.add_argument("--baselines", required=True)
    probe.add_argument("--bssid", required=True,
                       help="BSSID of the network being probed")
    probe.add_argument("--portal-url", dest="portal_url",
                       default="http://connectivitycheck.gstatic.com/generate_204")
    probe.add_argument("--i-understand-the-risk", dest="i_understand_the_risk",
                       action="store_true",
                       help="acknowledge that probing sends traffic over an "
                            "untrusted network")
    _add_now_argument(probe)
    probe.set_defaults(func=cmd_probe)

    oui = sub.add_parser("oui", help="vendor registry maintenance")
    oui_sub = oui.add_subparsers(dest="oui_command", required=True)
    oui_update = oui_sub.add_parser("update", help="install a registry file")
    oui_update.add_argument("manuf_file")
    oui_update.add_argument("--db", default=None)
    oui_update.add_argument("--lenient", action="store_true")
    oui_update.set_defaults(func=cmd_oui_update)

    fb = sub.add_parser("feedback", help="community feedback")
    fb_sub = fb.add_subparsers(dest="feedback_command", required=True)
    fb_add = fb_sub.add_parser("add", help="record a connection experience")
    fb_add.add_argument("--bssid", required=True)
    fb_add.add_argument("--ssid", required=True)
    fb_add.add_argument("--category", required=True,
                        choices=tuple(c.value for c in FeedbackCategory))
    fb_add.add_argument("--reporter", default="cli")
    fb_add.add_argument("--observed-at", dest="observed_at", default=None)
    fb_add.add_argument("--db", default=None)
    _add_now_argument(fb_add)
    fb_add.set_defaults(func=cmd_feedback_add)

    wgl = sub.add_parser("wigle", help="public-database lookups")
    wgl_sub = wgl.add_subparsers(dest="wigle_command", required=True)
    wgl_lookup = wgl_sub.add_parser("lookup", help="look up one BSSID")
    wgl_lookup.add_argument("--bssid", required=True)
    wgl_lookup.add_argument("--offline-fixtures", dest="offline_fixtures",
                            default=None)
    wgl_lookup.add_argument("--db", default=None)
    _add_now_argument(wgl_lookup)
    wgl_lookup.set_defaults(func=cmd_wigle_lookup)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("WIFICUE_LOG", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WifiCueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
