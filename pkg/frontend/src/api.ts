/** Typed client for the assessment service.
 *
 * Every non-2xx response carries an error envelope
 * {"error": {"code", "message", "details"?}}; this module turns those into
 * ApiError values so the UI can show one banner per failure.
 */

export type Decision = "ACCEPTABLE" | "CAUTION" | "AVOID";
export type FlagLevel =
  | "UNDETERMINED"
  | "POTENTIAL_NEGATIVE"
  | "NEGATIVE"
  | "CRITICAL_NEGATIVE";
export type Posture = "conservative" | "balanced" | "permissive";

export interface ObservationRecord {
  observed_at: string;
  scanner_id: string;
  bssid: string;
  ssid_b64: string;
  capabilities: string;
  channel: number;
  frequency_mhz: number;
  rssi_dbm: number;
  lat?: number | null;
  lon?: number | null;
  accuracy_m?: number | null;
}

export interface Flag {
  level: FlagLevel;
  code: string;
  message: string;
  evidence: Record<string, string>;
}

export interface CommunitySignal {
  n_reports: number;
  weight_total: number;
  failure_rate: number | null;
}

export interface Verdict {
  decision: Decision;
  score: number;
  reasons: string[];
}

export interface AssessmentEntry {
  observation: ObservationRecord;
  ssid: string;
  hidden: boolean;
  security: string;
  wps_advertised: boolean;
  vendor: string | null;
  flags: Flag[];
  community: CommunitySignal;
  verdict: Verdict;
}

export interface ScanReceipt {
  scan_id: string;
  accepted: number;
  skipped: number;
}

export interface FeedbackReport {
  bssid: string;
  ssid: string;
  category: string;
  observed_at: string;
  reporter_id: string;
}

export interface HistoryPage {
  bssid: string;
  total: number;
  limit: number;
  offset: number;
  records: ObservationRecord[];
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly details: Record<string, unknown>;

  constructor(status: number, code: string, message: string,
              details: Record<string, unknown> = {}) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.details = details;
  }
}

export interface ClientConfig {
  baseUrl?: string;
  token?: string;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly token?: string;

  constructor(config: ClientConfig = {}) {
    this.baseUrl = (config.baseUrl ?? "").replace(/\/$/, "");
    this.token = config.token;
  }

  async uploadScan(records: ObservationRecord[]): Promise<ScanReceipt> {
    return this.request("POST", "/v1/scans", { body: records });
  }

  async assessment(scanId: string, posture: Posture,
                   signal?: AbortSignal): Promise<AssessmentEntry[]> {
    const path = `/v1/scans/${encodeURIComponent(scanId)}/assessment` +
      `?posture=${posture}`;
    return this.request("GET", path, { signal });
  }

  async history(bssid: string, limit = 50, offset = 0): Promise<HistoryPage> {
    const path = `/v1/aps/${encodeURIComponent(bssid)}/history` +
      `?limit=${limit}&offset=${offset}`;
    return this.request("GET", path);
  }

  async postFeedback(report: FeedbackReport):
      Promise<{ accepted: boolean; report: FeedbackReport }> {
    return this.request("POST", "/v1/feedback", { body: report });
  }

  private async request<T>(method: string, path: string, options: {
    body?: unknown;
    signal?: AbortSignal;
  } = {}): Promise<T> {
    const headers: Record<string, string> = {};
    if (options.body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers,
        body: options.body === undefined
          ? undefined : JSON.stringify(options.body),
        signal: options.signal,
      });
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") {
        throw err; // cancellation is the caller's business, not a failure
      }
      throw new ApiError(0, "UNREACHABLE",
        "the assessment service did not answer");
    }
    if (!response.ok) {
      throw await envelopeToError(response);
    }
    return response.json() as Promise<T>;
  }
}

async function envelopeToError(response: Response): Promise<ApiError> {
  try {
    const body = await response.json();
    const error = body?.error;
    if (error && typeof error.code === "string") {
      return new ApiError(response.status, error.code,
        String(error.message ?? ""), error.details ?? {});
    }
  } catch {
    // fall through: a broken body still deserves a visible banner
  }
  return new ApiError(response.status, "HTTP_ERROR",
    `request failed with status ${response.status}`);
}
