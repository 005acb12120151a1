// Typed client for the console's slice of the station API.
// Every call can be recorded (the conformance test relies on this), and API
// errors surface verbatim with the station's error name.

import type {
  AccessRequest,
  CapsuleStatus,
  ConsoleConfig,
  HumanTask,
  LedgerAccount,
} from "./types.js";

export interface RecordedCall {
  method: string;
  path: string;
  status: number;
  responseBody: string;
}

export class StationApiError extends Error {
  readonly errorName: string;
  readonly detail: string;
  readonly status: number;

  constructor(errorName: string, detail: string, status: number) {
    super(`${errorName}: ${detail}`);
    this.errorName = errorName;
    this.detail = detail;
    this.status = status;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class StationClient {
  private readonly baseUrl: string;
  private readonly secret: string;
  private readonly fetchImpl: FetchLike;
  private recorder: ((call: RecordedCall) => void) | null = null;

  constructor(config: ConsoleConfig, fetchImpl?: FetchLike) {
    this.baseUrl = config.baseUrl.replace(/\/$/, "");
    this.secret = config.identitySecret;
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  onRequest(recorder: (call: RecordedCall) => void): void {
    this.recorder = recorder;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { Authorization: `Bearer ${this.secret}` },
    };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const text = await response.text();
    this.recorder?.({ method, path, status: response.status, responseBody: text });
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      throw new StationApiError("MalformedresponseBody", text.slice(0, 200), response.status);
    }
    if (!response.ok) {
      const record = (parsed ?? {}) as { error?: string; detail?: string };
      throw new StationApiError(
        record.error ?? `HTTP${response.status}`,
        record.detail ?? "",
        response.status,
      );
    }
    return parsed as T;
  }

  async listAccessRequests(): Promise<AccessRequest[]> {
    const body = await this.request<{ requests: AccessRequest[] }>("GET", "/access-requests");
    return body.requests;
  }

  async decideRequest(
    requestId: string,
    decision: "approve" | "deny",
    uses?: number,
    expiry?: number,
  ): Promise<AccessRequest> {
    return this.request<AccessRequest>("POST", `/access-requests/${requestId}/decision`, {
      decision,
      uses: uses ?? null,
      expiry: expiry ?? null,
    });
  }

  async listOpenTasks(): Promise<HumanTask[]> {
    const body = await this.request<{ tasks: HumanTask[] }>("GET", "/tasks");
    return body.tasks;
  }

  async listMyTasks(): Promise<HumanTask[]> {
    const body = await this.request<{ tasks: HumanTask[] }>("GET", "/tasks?mine=true");
    return body.tasks;
  }

  async claimTask(taskId: string): Promise<HumanTask> {
    return this.request<HumanTask>("POST", `/tasks/${taskId}/claim`);
  }

  async answerTask(taskId: string, content: string): Promise<unknown> {
    return this.request("POST", `/tasks/${taskId}/answer`, { content });
  }

  async ledgerMe(): Promise<LedgerAccount> {
    return this.request<LedgerAccount>("GET", "/ledger/me");
  }

  async capsuleStatus(fingerprint: string): Promise<CapsuleStatus> {
    return this.request<CapsuleStatus>("GET", `/capsules/${fingerprint}`);
  }
}
