/** Pure DOM builders. Every number and verdict shown here comes straight
 * from an API payload; the client never scores anything itself. */

import type { ApiError } from "./api.js";
import type { AssessmentEntry, Flag } from "./api.js";

const LEVEL_CLASS: Record<string, string> = {
  CRITICAL_NEGATIVE: "flag-critical",
  NEGATIVE: "flag-negative",
  POTENTIAL_NEGATIVE: "flag-potential",
  UNDETERMINED: "flag-undetermined",
};

export function displaySsid(entry: AssessmentEntry): string {
  return entry.hidden ? "(hidden)" : entry.ssid;
}

export function badgeFor(decision: string): HTMLSpanElement {
  const badge = document.createElement("span");
  badge.className = `badge badge-${decision.toLowerCase()}`;
  badge.textContent = decision;
  return badge;
}

function flagChip(flag: Flag): HTMLSpanElement {
  const chip = document.createElement("span");
  chip.className = `flag ${LEVEL_CLASS[flag.level] ?? "flag-undetermined"}`;
  chip.textContent = flag.code;
  chip.title = flag.message;
  return chip;
}

function communityText(entry: AssessmentEntry): string {
  const community = entry.community;
  if (community.failure_rate === null) {
    return community.n_reports === 0
      ? "no reports" : `${community.n_reports} reports (undetermined)`;
  }
  const percent = (community.failure_rate * 100).toFixed(0);
  return `${community.n_reports} reports, ${percent}% failed`;
}

export function renderAssessment(table: HTMLTableSectionElement,
                                 entries: AssessmentEntry[]): void {
  table.replaceChildren();
  for (const entry of entries) {
    const row = table.insertRow();
    row.className = "ap-row";
    row.dataset.bssid = entry.observation.bssid;

    row.insertCell().appendChild(badgeFor(entry.verdict.decision));

    const score = row.insertCell();
    score.className = "score";
    score.textContent = entry.verdict.score.toFixed(2);

    const ssid = row.insertCell();
    ssid.className = entry.hidden ? "ssid hidden-ssid" : "ssid";
    ssid.textContent = displaySsid(entry);

    const bssid = row.insertCell();
    bssid.className = "bssid";
    bssid.textContent = entry.observation.bssid;

    const vendor = row.insertCell();
    vendor.className = "vendor";
    vendor.textContent = entry.vendor ?? "unknown vendor";

    const security = row.insertCell();
    security.textContent = entry.security
      + (entry.wps_advertised ? " +WPS" : "");

    const flags = row.insertCell();
    flags.className = "flags";
    for (const flag of entry.flags) {
      flags.appendChild(flagChip(flag));
    }

    const community = row.insertCell();
    community.className = "community";
    community.textContent = communityText(entry);
  }
}

export function renderBanner(region: HTMLElement, error: ApiError): void {
  const banner = document.createElement("div");
  banner.className = "banner banner-error";
  banner.setAttribute("role", "alert");

  const code = document.createElement("strong");
  code.textContent = error.code;
  banner.appendChild(code);
  banner.appendChild(document.createTextNode(` ${error.message}`));

  const dismiss = document.createElement("button");
  dismiss.type = "button";
  dismiss.className = "banner-dismiss";
  dismiss.textContent = "dismiss";
  dismiss.addEventListener("click", () => banner.remove());
  banner.appendChild(dismiss);

  region.appendChild(banner);
}

export function renderNotice(region: HTMLElement, text: string): void {
  const banner = document.createElement("div");
  banner.className = "banner banner-notice";
  banner.textContent = text;
  region.appendChild(banner);
  setTimeout(() => banner.remove(), 6000);
}

export function probeFlagCodes(entries: AssessmentEntry[]): Map<string, Set<string>> {
  const byBssid = new Map<string, Set<string>>();
  for (const entry of entries) {
    const codes = entry.flags
      .filter((flag) => flag.code.startsWith("PROBE_"))
      .map((flag) => flag.code);
    byBssid.set(entry.observation.bssid, new Set(codes));
  }
  return byBssid;
}

export function renderProbeAlert(region: HTMLElement, bssid: string,
                                 codes: string[]): void {
  const alert = document.createElement("div");
  alert.className = "banner banner-error probe-alert";
  alert.setAttribute("role", "alert");
  const heading = document.createElement("strong");
  heading.textContent = "probe findings for " + bssid;
  alert.appendChild(heading);
  for (const code of codes) {
    const chip = document.createElement("span");
    chip.className = "flag flag-critical";
    chip.textContent = code;
    alert.appendChild(chip);
  }
  region.appendChild(alert);
}
