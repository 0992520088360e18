/** Dashboard controller: owns the page shell, one scan, one posture, and at
 * most one in-flight assessment request (latest wins). */

import { ApiClient, ApiError } from "./api.js";
import type { AssessmentEntry, ObservationRecord, Posture } from "./api.js";
import {
  probeFlagCodes,
  renderAssessment,
  renderBanner,
  renderNotice,
  renderProbeAlert,
} from "./render.js";

const PROBE_POLL_MS = 2000;

const FEEDBACK_CATEGORIES = [
  "NO_INTERNET", "APP_FAILURE", "PORTAL_HIJACK",
  "CERT_WARNING", "SLOW", "WORKED_OK",
];

const SHELL = `
  <header class="topbar">
    <h1>wificue</h1>
    <nav class="postures" aria-label="risk posture">
      ${(["conservative", "balanced", "permissive"] as Posture[]).map((p) => `
      <label class="posture-option">
        <input type="radio" name="posture" value="${p}"
               ${p === "balanced" ? "checked" : ""}>
        <span>${p}</span>
      </label>`).join("")}
    </nav>
  </header>
  <div id="banners" class="banners" aria-live="polite"></div>

  <section class="panel" id="upload-panel">
    <h2>Scan</h2>
    <p class="hint">Paste a scan log (one JSON observation per line) and
      upload it for assessment.</p>
    <textarea id="scan-input" rows="6" spellcheck="false"
              placeholder='{"observed_at": "...", "bssid": "...", ...}'></textarea>
    <button id="upload-button" type="button">Upload and assess</button>
    <span id="scan-summary" class="hint"></span>
  </section>

  <section class="panel" id="assessment-panel" hidden>
    <h2>Assessment</h2>
    <table class="assessment">
      <thead>
        <tr>
          <th>verdict</th><th>score</th><th>ssid</th><th>bssid</th>
          <th>vendor</th><th>security</th><th>flags</th><th>community</th>
        </tr>
      </thead>
      <tbody id="assessment-body"></tbody>
    </table>
  </section>

  <section class="panel" id="feedback-panel">
    <h2>Report a connection experience</h2>
    <form id="feedback-form">
      <label>BSSID <input name="bssid" required
             placeholder="aa:bb:cc:dd:ee:ff"></label>
      <label>SSID <input name="ssid" required></label>
      <label>Category
        <select name="category">
          ${FEEDBACK_CATEGORIES.map((c) => `<option>${c}</option>`).join("")}
        </select>
      </label>
      <label>Reporter <input name="reporter_id" value="dashboard"></label>
      <button id="feedback-submit" type="submit">Send report</button>
    </form>
  </section>

  <section class="panel" id="probe-panel">
    <h2>Post-connection probe</h2>
    <p class="warning">Probes send real traffic over the network under test.
      A hostile access point can observe, redirect, or tamper with that
      traffic and can fingerprint the probing device.</p>
    <label class="ack">
      <input type="checkbox" id="probe-ack"> I understand the risk
    </label>
    <label>BSSID under test <input id="probe-bssid"
           placeholder="aa:bb:cc:dd:ee:ff"></label>
    <button id="probe-start" type="button" disabled>Start watching</button>
    <div id="probe-instructions" hidden>
      <p>On the machine connected to that network, run:</p>
      <pre id="probe-command"></pre>
      <p class="hint" id="probe-status">Waiting for probe findings...</p>
    </div>
    <div id="probe-alerts"></div>
  </section>
`;

export class App {
  private readonly client: ApiClient;
  private readonly root: HTMLElement;

  private scanId: string | null = null;
  private posture: Posture = "balanced";
  private inflight: AbortController | null = null;

  private probeBaseline: Map<string, Set<string>> | null = null;
  private probeTimer: ReturnType<typeof setInterval> | null = null;

  constructor(root: HTMLElement, client: ApiClient) {
    this.root = root;
    this.client = client;
    root.innerHTML = SHELL;
    this.wire();
  }

  private element<T extends HTMLElement>(selector: string): T {
    const found = this.root.querySelector<T>(selector);
    if (!found) {
      throw new Error(`missing element: ${selector}`);
    }
    return found;
  }

  private wire(): void {
    this.element<HTMLButtonElement>("#upload-button")
      .addEventListener("click", () => void this.upload());

    for (const radio of this.root.querySelectorAll<HTMLInputElement>(
        'input[name="posture"]')) {
      radio.addEventListener("change", () => {
        if (radio.checked) {
          this.posture = radio.value as Posture;
          void this.refresh();
        }
      });
    }

    this.element<HTMLFormElement>("#feedback-form")
      .addEventListener("submit", (event) => {
        event.preventDefault();
        void this.sendFeedback();
      });

    const ack = this.element<HTMLInputElement>("#probe-ack");
    const start = this.element<HTMLButtonElement>("#probe-start");
    ack.addEventListener("change", () => {
      start.disabled = !ack.checked;
    });
    start.addEventListener("click", () => void this.startProbeWatch());
  }

  private banner(error: ApiError): void {
    renderBanner(this.element("#banners"), error);
  }

  async upload(): Promise<void> {
    const input = this.element<HTMLTextAreaElement>("#scan-input");
    let records: ObservationRecord[];
    try {
      records = parseScanLines(input.value);
    } catch (err) {
      this.banner(new ApiError(0, "CLIENT_PARSE", (err as Error).message));
      return;
    }
    if (records.length === 0) {
      this.banner(new ApiError(0, "CLIENT_PARSE",
        "the scan log contains no observations"));
      return;
    }
    const button = this.element<HTMLButtonElement>("#upload-button");
    button.disabled = true;
    try {
      const receipt = await this.client.uploadScan(records);
      this.scanId = receipt.scan_id;
      this.element("#scan-summary").textContent =
        `scan ${receipt.scan_id}: ${receipt.accepted} new, ` +
        `${receipt.skipped} already known`;
      await this.refresh();
    } catch (err) {
      this.reportFailure(err);
    } finally {
      button.disabled = false;
    }
  }

  /** Fetch and render the assessment for the current scan and posture.
   * A newer call aborts the older one so a slow response can never
   * overwrite a fresher document. */
  async refresh(): Promise<AssessmentEntry[] | null> {
    if (!this.scanId) {
      return null;
    }
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const entries = await this.client.assessment(
        this.scanId, this.posture, controller.signal);
      if (this.inflight === controller) {
        this.element("#assessment-panel").hidden = false;
        renderAssessment(
          this.element<HTMLTableSectionElement>("#assessment-body"), entries);
      }
      return entries;
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") {
        return null;
      }
      this.reportFailure(err);
      return null;
    }
  }

  async sendFeedback(): Promise<void> {
    const form = this.element<HTMLFormElement>("#feedback-form");
    const submit = this.element<HTMLButtonElement>("#feedback-submit");
    if (submit.disabled) {
      return; // a submission is already on the wire
    }
    const data = new FormData(form);
    const report = {
      bssid: String(data.get("bssid") ?? "").trim(),
      ssid: String(data.get("ssid") ?? ""),
      category: String(data.get("category") ?? ""),
      observed_at: nowSeconds(),
      reporter_id: String(data.get("reporter_id") ?? "").trim(),
    };
    submit.disabled = true;
    try {
      await this.client.postFeedback(report);
      renderNotice(this.element("#banners"),
        `recorded ${report.category} for ${report.bssid}`);
      form.reset();
      await this.refresh();
    } catch (err) {
      this.reportFailure(err);
    } finally {
      submit.disabled = false;
    }
  }

  /** Show the probe instructions and poll the assessment until new PROBE_*
   * flags appear for the network under test. */
  async startProbeWatch(): Promise<void> {
    const bssid = this.element<HTMLInputElement>("#probe-bssid").value.trim();
    if (!bssid) {
      this.banner(new ApiError(0, "CLIENT_PARSE",
        "enter the BSSID of the network being probed"));
      return;
    }
    if (!this.scanId) {
      this.banner(new ApiError(0, "CLIENT_PARSE",
        "upload a scan first so probe findings have somewhere to land"));
      return;
    }
    this.element("#probe-instructions").hidden = false;
    this.element("#probe-command").textContent =
      `wificue probe --baselines BASELINES_DIR --bssid ${bssid} ` +
      "--i-understand-the-risk";

    const entries = await this.refresh();
    this.probeBaseline = probeFlagCodes(entries ?? []);
    this.stopProbeWatch();
    this.probeTimer = setInterval(() => void this.pollProbe(bssid),
                                  PROBE_POLL_MS);
  }

  private stopProbeWatch(): void {
    if (this.probeTimer !== null) {
      clearInterval(this.probeTimer);
      this.probeTimer = null;
    }
  }

  private async pollProbe(bssid: string): Promise<void> {
    const entries = await this.refresh();
    if (!entries || !this.probeBaseline) {
      return;
    }
    const current = probeFlagCodes(entries);
    const seen = this.probeBaseline.get(bssid) ?? new Set<string>();
    const fresh = [...(current.get(bssid) ?? [])]
      .filter((code) => !seen.has(code))
      .sort();
    if (fresh.length > 0) {
      this.stopProbeWatch();
      this.element("#probe-status").textContent =
        "probe findings arrived; watching stopped";
      renderProbeAlert(this.element("#probe-alerts"), bssid, fresh);
    }
  }

  private reportFailure(err: unknown): void {
    if (err instanceof ApiError) {
      this.banner(err);
    } else {
      this.banner(new ApiError(0, "CLIENT_ERROR", String(err)));
    }
  }
}

export function parseScanLines(text: string): ObservationRecord[] {
  const records: ObservationRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i += 1) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    try {
      records.push(JSON.parse(line));
    } catch {
      throw new Error(`line ${i + 1} is not valid JSON`);
    }
  }
  return records;
}

function nowSeconds(): string {
  return new Date().toISOString().replace(/\.\d{3}Z$/, "Z");
}
