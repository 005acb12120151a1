// Console state: a snapshot of server data plus the fingerprints the user
// watches. Mutations go to the server first and the view re-renders only
// from refetched state; there is no optimistic path.

import { StationApiError, StationClient } from "./client.js";
import type {
  AccessRequest,
  CapsuleStatus,
  HumanTask,
  LedgerAccount,
} from "./types.js";

export interface ConsoleState {
  requests: AccessRequest[];
  openTasks: HumanTask[];
  myTasks: HumanTask[];
  ledger: LedgerAccount | null;
  capsules: Record<string, CapsuleStatus>;
  watched: string[];
  lastError: string;
}

export function emptyState(): ConsoleState {
  return {
    requests: [],
    openTasks: [],
    myTasks: [],
    ledger: null,
    capsules: {},
    watched: [],
    lastError: "",
  };
}

export class ConsoleStore {
  readonly client: StationClient;
  state: ConsoleState = emptyState();
  private listeners: Array<(state: ConsoleState) => void> = [];

  constructor(client: StationClient) {
    this.client = client;
  }

  subscribe(listener: (state: ConsoleState) => void): void {
    this.listeners.push(listener);
  }

  private publish(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  watch(fingerprint: string): void {
    const fp = fingerprint.trim();
    if (fp && !this.state.watched.includes(fp)) {
      this.state.watched.push(fp);
    }
  }

  /** One polling round: refetch every panel, then render. */
  async refresh(): Promise<void> {
    try {
      const [requests, openTasks, myTasks, ledger] = await Promise.all([
        this.client.listAccessRequests(),
        this.client.listOpenTasks(),
        this.client.listMyTasks(),
        this.client.ledgerMe(),
      ]);
      const capsules: Record<string, CapsuleStatus> = {};
      for (const fp of this.state.watched) {
        try {
          capsules[fp] = await this.client.capsuleStatus(fp);
        } catch (err) {
          if (!(err instanceof StationApiError)) throw err;
          // unknown or foreign capsule: drop it from the board, keep polling others
        }
      }
      this.state = { ...this.state, requests, openTasks, myTasks, ledger, capsules, lastError: "" };
    } catch (err) {
      this.state = { ...this.state, lastError: describeError(err) };
    }
    this.publish();
  }

  async approve(requestId: string, uses?: number): Promise<void> {
    await this.mutate(() => this.client.decideRequest(requestId, "approve", uses));
  }

  async deny(requestId: string): Promise<void> {
    await this.mutate(() => this.client.decideRequest(requestId, "deny"));
  }

  async claim(taskId: string): Promise<void> {
    await this.mutate(() => this.client.claimTask(taskId));
  }

  async answer(taskId: string, content: string): Promise<void> {
    await this.mutate(() => this.client.answerTask(taskId, content));
  }

  private async mutate(action: () => Promise<unknown>): Promise<void> {
    let failure = "";
    try {
      await action();
    } catch (err) {
      failure = describeError(err);
    }
    await this.refresh(); // state changes render only after the server confirms
    if (failure) {
      this.state = { ...this.state, lastError: failure };
      this.publish();
    }
  }
}

export function describeError(err: unknown): string {
  if (err instanceof StationApiError) {
    return err.detail ? `${err.errorName}: ${err.detail}` : err.errorName;
  }
  return String(err);
}
