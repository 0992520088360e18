import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import type { AssessmentEntry } from "../src/api.js";
import { App, parseScanLines } from "../src/app.js";
import balanced from "./fixtures/assessment_balanced.json";
import conservative from "./fixtures/assessment_conservative.json";

const BALANCED = balanced as unknown as AssessmentEntry[];
const CONSERVATIVE = conservative as unknown as AssessmentEntry[];
const SCAN_TEXT = BALANCED
  .map((entry) => JSON.stringify(entry.observation)).join("\n");

interface ServerLog {
  url: string;
  method: string;
  body?: string;
}

/** In-memory stand-in for the service: serves the golden documents and
 * records every request it sees. */
function installServer(options: { probePhase?: { active: boolean } } = {}) {
  const log: ServerLog[] = [];
  vi.stubGlobal("fetch", vi.fn(async (url: string, init: RequestInit = {}) => {
    log.push({
      url: String(url),
      method: init.method ?? "GET",
      body: typeof init.body === "string" ? init.body : undefined,
    });
    const path = String(url);
    if (path === "/v1/scans") {
      return json({ scan_id: "scan-1", accepted: 12, skipped: 0 });
    }
    if (path.startsWith("/v1/scans/scan-1/assessment")) {
      const posture = new URL(path, "http://x").searchParams.get("posture");
      let doc = posture === "conservative" ? CONSERVATIVE : BALANCED;
      if (options.probePhase?.active) {
        doc = withProbeFlag(doc, "00:14:22:0a:0b:0c", "PROBE_DNS_TAMPER");
      }
      return json(doc);
    }
    if (path === "/v1/feedback") {
      return json({ accepted: true, report: JSON.parse(init.body as string) });
    }
    return json({ error: { code: "NOT_FOUND", message: `no route ${path}` } },
                404);
  }));
  return log;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), { status });
}

function withProbeFlag(doc: AssessmentEntry[], bssid: string,
                       code: string): AssessmentEntry[] {
  const copy = JSON.parse(JSON.stringify(doc)) as AssessmentEntry[];
  const entry = copy.find((e) => e.observation.bssid === bssid)!;
  entry.flags.push({ level: "CRITICAL_NEGATIVE", code,
                     message: "resolved answers disagree", evidence: {} });
  return copy;
}

function mountApp(): App {
  document.body.innerHTML = "<div id='app'></div>";
  return new App(document.getElementById("app")!, new ApiClient());
}

function setValue(selector: string, value: string): void {
  const input = document.querySelector(selector) as HTMLInputElement;
  input.value = value;
}

function click(selector: string): void {
  (document.querySelector(selector) as HTMLElement).click();
}

async function uploadGoldenScan(app: App): Promise<void> {
  setValue("#scan-input", SCAN_TEXT);
  click("#upload-button");
  await vi.waitFor(() => {
    expect(document.querySelectorAll("tr.ap-row").length).toBeGreaterThan(0);
  });
  void app;
}

function rowBadge(bssid: string): string | null | undefined {
  return document
    .querySelector(`tr[data-bssid="${bssid}"] .badge`)?.textContent;
}

beforeEach(() => {
  vi.useRealTimers();
});

afterEach(() => {
  vi.unstubAllGlobals();
  vi.useRealTimers();
});

describe("upload and first render", () => {
  it("uploads the pasted scan and renders every row", async () => {
    const log = installServer();
    const app = mountApp();
    await uploadGoldenScan(app);
    expect(document.querySelectorAll("tr.ap-row")).toHaveLength(12);
    expect(log[0]).toMatchObject({ method: "POST", url: "/v1/scans" });
    expect(log[1].url).toBe("/v1/scans/scan-1/assessment?posture=balanced");
    expect(document.getElementById("scan-summary")!.textContent)
      .toContain("12 new");
  });

  it("rejects a scan log that is not JSONL, without calling the API", () => {
    const log = installServer();
    mountApp();
    setValue("#scan-input", "not json");
    click("#upload-button");
    expect(document.querySelector(".banner-error")!.textContent)
      .toContain("CLIENT_PARSE");
    expect(log).toHaveLength(0);
  });

  it("parseScanLines skips blanks and reports the offending line", () => {
    expect(parseScanLines('\n{"a": 1}\n\n{"b": 2}\n')).toEqual([
      { a: 1 }, { b: 2 }]);
    expect(() => parseScanLines('{"a": 1}\n{oops'))
      .toThrow("line 2 is not valid JSON");
  });
});

describe("posture toggle", () => {
  it("re-fetches and flips the borderline row from CAUTION to AVOID", async () => {
    installServer();
    const app = mountApp();
    await uploadGoldenScan(app);
    expect(rowBadge("00:14:22:0a:0b:0c")).toBe("CAUTION");

    click('input[name="posture"][value="conservative"]');
    await vi.waitFor(() => {
      expect(rowBadge("00:14:22:0a:0b:0c")).toBe("AVOID");
    });
  });

  it("aborts the slow request when a newer one starts (latest wins)", async () => {
    const signals: AbortSignal[] = [];
    let phase = 0;
    vi.stubGlobal("fetch", vi.fn((url: string, init: RequestInit = {}) => {
      const path = String(url);
      if (path === "/v1/scans") {
        return Promise.resolve(json({ scan_id: "scan-1", accepted: 12,
                                      skipped: 0 }));
      }
      phase += 1;
      if (phase === 1) { // initial upload's assessment
        return Promise.resolve(json(BALANCED));
      }
      signals.push(init.signal!);
      if (signals.length === 1) {
        // first toggle: hang until aborted
        return new Promise<Response>((_resolve, reject) => {
          init.signal!.addEventListener("abort", () =>
            reject(new DOMException("aborted", "AbortError")));
        });
      }
      return Promise.resolve(json(CONSERVATIVE));
    }));
    const app = mountApp();
    await uploadGoldenScan(app);

    click('input[name="posture"][value="permissive"]'); // hangs
    click('input[name="posture"][value="conservative"]'); // resolves
    await vi.waitFor(() => {
      expect(rowBadge("00:14:22:0a:0b:0c")).toBe("AVOID");
    });
    expect(signals[0].aborted).toBe(true);
  });
});

describe("feedback form", () => {
  it("POSTs the exact documented body and refreshes the assessment", async () => {
    vi.useFakeTimers();
    vi.setSystemTime(new Date("2025-06-01T12:00:00Z"));
    const log = installServer();
    const app = mountApp();

    setValue("#scan-input", SCAN_TEXT);
    click("#upload-button");
    await vi.advanceTimersByTimeAsync(0);
    expect(document.querySelectorAll("tr.ap-row")).toHaveLength(12);
    void app;

    setValue('#feedback-form input[name="bssid"]', "00:14:22:0a:0b:0c");
    setValue('#feedback-form input[name="ssid"]', "CoffeeShack");
    (document.querySelector('#feedback-form select[name="category"]') as
      HTMLSelectElement).value = "NO_INTERNET";
    document.getElementById("feedback-form")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    await vi.advanceTimersByTimeAsync(0);

    const post = log.find((r) => r.url === "/v1/feedback")!;
    expect(post.body).toBe(JSON.stringify({
      bssid: "00:14:22:0a:0b:0c",
      ssid: "CoffeeShack",
      category: "NO_INTERNET",
      observed_at: "2025-06-01T12:00:00Z",
      reporter_id: "dashboard",
    }));
    expect(document.querySelector(".banner-notice")!.textContent)
      .toContain("NO_INTERNET");
    const assessments = log.filter((r) => r.url.includes("/assessment"));
    expect(assessments.length).toBe(2); // initial render + post-feedback
  });

  it("guards against double submission while a report is on the wire", async () => {
    let release: (r: Response) => void = () => undefined;
    const log: ServerLog[] = [];
    vi.stubGlobal("fetch", vi.fn((url: string, init: RequestInit = {}) => {
      log.push({ url: String(url), method: init.method ?? "GET" });
      if (String(url) === "/v1/feedback") {
        return new Promise<Response>((resolve) => { release = resolve; });
      }
      return Promise.resolve(json({ scan_id: "s", accepted: 0, skipped: 0 }));
    }));
    mountApp();
    setValue('#feedback-form input[name="bssid"]', "00:14:22:0a:0b:0c");
    setValue('#feedback-form input[name="ssid"]', "Net");

    const form = document.getElementById("feedback-form")!;
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    const submit = document.getElementById(
      "feedback-submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(log.filter((r) => r.url === "/v1/feedback")).toHaveLength(1);

    release(json({ accepted: true, report: {} }));
    await vi.waitFor(() => expect(submit.disabled).toBe(false));
  });
});

describe("probe wizard", () => {
  it("requires the risk acknowledgement before it can start", () => {
    installServer();
    mountApp();
    const start = document.getElementById("probe-start") as HTMLButtonElement;
    expect(start.disabled).toBe(true);
    click("#probe-ack");
    expect(start.disabled).toBe(false);
    const warning = document.querySelector("#probe-panel .warning")!;
    expect(warning.textContent).toContain("real traffic");
  });

  it("shows the CLI command, polls, and raises the tamper alert", async () => {
    const probePhase = { active: false };
    const log = installServer({ probePhase });
    const app = mountApp();
    await uploadGoldenScan(app);

    vi.useFakeTimers();
    click("#probe-ack");
    setValue("#probe-bssid", "00:14:22:0a:0b:0c");
    click("#probe-start");
    await vi.advanceTimersByTimeAsync(0); // baseline snapshot fetch

    const command = document.getElementById("probe-command")!.textContent!;
    expect(command).toContain("wificue probe");
    expect(command).toContain("--bssid 00:14:22:0a:0b:0c");
    expect(command).toContain("--i-understand-the-risk");

    await vi.advanceTimersByTimeAsync(2000); // poll: nothing new yet
    expect(document.querySelector(".probe-alert")).toBeNull();

    probePhase.active = true; // the user ran the probe; flags landed
    await vi.advanceTimersByTimeAsync(2000);
    const alert = document.querySelector(".probe-alert")!;
    expect(alert.textContent).toContain("PROBE_DNS_TAMPER");
    expect(alert.textContent).toContain("00:14:22:0a:0b:0c");

    // the wizard stops polling once findings arrive
    const polls = log.filter((r) => r.url.includes("/assessment")).length;
    await vi.advanceTimersByTimeAsync(6000);
    expect(log.filter((r) => r.url.includes("/assessment")).length)
      .toBe(polls);
  });
});

describe("failure surfaces", () => {
  it("any error envelope becomes a visible banner", async () => {
    vi.stubGlobal("fetch", vi.fn(async () =>
      json({ error: { code: "TOO_LARGE",
                      message: "scan upload exceeds 5 MB" } }, 413)));
    mountApp();
    setValue("#scan-input", SCAN_TEXT);
    click("#upload-button");
    await vi.waitFor(() => {
      const banner = document.querySelector(".banner-error");
      expect(banner).not.toBeNull();
      expect(banner!.textContent).toContain("TOO_LARGE");
      expect(banner!.textContent).toContain("exceeds 5 MB");
    });
  });
});
