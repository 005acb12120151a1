import { describe, expect, it } from "vitest";

import { StationApiError, StationClient } from "../src/client";
import type { RecordedCall } from "../src/client";
import { demoState, fakeFetch } from "./fake_station";

function clientFor(secret = "carol-secret") {
  const state = demoState();
  const client = new StationClient(
    { baseUrl: "http://station", identitySecret: secret },
    fakeFetch(state),
  );
  return { client, state };
}

describe("StationClient", () => {
  it("sends the bearer secret and parses records", async () => {
    const { client } = clientFor();
    const requests = await client.listAccessRequests();
    expect(requests).toHaveLength(1);
    expect(requests[0].status).toBe("pending");
  });

  it("rejects with the verbatim station error name", async () => {
    const { client } = clientFor();
    await expect(client.capsuleStatus("missing")).rejects.toMatchObject({
      errorName: "NotFound",
    });
    const err = await client.capsuleStatus("missing").catch((e) => e);
    expect(err).toBeInstanceOf(StationApiError);
    expect(String(err)).toContain("NotFound");
  });

  it("fails without an identity secret", async () => {
    const state = demoState();
    const raw = new StationClient({ baseUrl: "http://station", identitySecret: "" }, async (url, init) => {
      const headers = init?.headers as Record<string, string>;
      headers.Authorization = ""; // simulate a missing header
      return fakeFetch(state)(url, init);
    });
    await expect(raw.ledgerMe()).rejects.toMatchObject({ errorName: "AuthRequired" });
  });

  it("records every call it makes", async () => {
    const { client } = clientFor();
    const calls: RecordedCall[] = [];
    client.onRequest((call) => calls.push(call));
    await client.listOpenTasks();
    await client.ledgerMe();
    expect(calls.map((c) => [c.method, c.path])).toEqual([
      ["GET", "/tasks"],
      ["GET", "/ledger/me"],
    ]);
    expect(calls.every((c) => c.status === 200)).toBe(true);
  });

  it("decides requests and returns the updated record", async () => {
    const { client, state } = clientFor();
    const decided = await client.decideRequest("req-1", "approve", 1);
    expect(decided.status).toBe("approved");
    expect(state.requests[0].status).toBe("approved");
    await expect(client.decideRequest("req-1", "deny")).rejects.toMatchObject({
      errorName: "AlreadyDecided",
    });
  });
});
