// Console conformance: recorded traffic for the steward walkthrough uses
// only documented endpoints, carries no raw-row payloads, and the approve /
// answer flows flip the corresponding states within one polling round.

import { describe, expect, it } from "vitest";

import { StationClient } from "../src/client";
import type { RecordedCall } from "../src/client";
import { isConsoleEndpoint, isDocumentedEndpoint } from "../src/endpoints";
import { ConsoleStore } from "../src/state";
import { demoState, fakeFetch } from "./fake_station";

function stewardSession() {
  const state = demoState();
  const client = new StationClient(
    { baseUrl: "http://station", identitySecret: "carol-secret" },
    fakeFetch(state),
  );
  const calls: RecordedCall[] = [];
  client.onRequest((call) => calls.push(call));
  const store = new ConsoleStore(client);
  return { state, store, calls };
}

describe("console conformance", () => {
  it("drives the demo flows through documented endpoints only", async () => {
    const { state, store, calls } = stewardSession();
    store.watch("fp-join");
    store.watch("fp-brokered");

    await store.refresh(); // poll 1: blocked capsule, pending request visible
    expect(store.state.capsules["fp-join"].status).toBe("blocked");
    expect(store.state.requests[0].status).toBe("pending");

    // approve flow: decision, then the very next poll shows it approved
    await store.approve("req-1", 1);
    expect(store.state.requests[0].status).toBe("approved");

    // answer flow: claim + answer, then the very next poll flips the capsule
    await store.claim("task-1");
    await store.answer("task-1", "0");
    expect(store.state.capsules["fp-join"].status).toBe("satisfied");
    expect(store.state.ledger?.balance).toBe(30);

    expect(calls.length).toBeGreaterThan(10);
    for (const call of calls) {
      expect(
        isDocumentedEndpoint(call.method, call.path),
        `undocumented call: ${call.method} ${call.path}`,
      ).toBe(true);
      expect(
        isConsoleEndpoint(call.method, call.path),
        `outside console surface: ${call.method} ${call.path}`,
      ).toBe(true);
    }

    // sealing: the console never touches row-bearing endpoints, and nothing
    // in the exchanged payloads looks like table content
    for (const call of calls) {
      expect(call.path.startsWith("/results")).toBe(false);
      expect(call.path.startsWith("/datasets")).toBe(false);
      expect(call.responseBody).not.toContain('"rows"');
      expect(call.responseBody).not.toContain('"table"');
    }

    // fake station state advanced as the real one would
    expect(state.tasks[0].status).toBe("answered");
    expect(state.requests[0].token).toBe("tok-abc");
  });

  it("surfaces station errors verbatim instead of mutating optimistically", async () => {
    const { store } = stewardSession();
    await store.refresh();
    await store.claim("task-1");
    await store.claim("task-1"); // second claim: AlreadyClaimed from the server
    expect(store.state.lastError).toContain("AlreadyClaimed");
    // state still reflects the server, not a hopeful local edit
    expect(store.state.openTasks).toHaveLength(0);
  });

  it("keeps polling the board when one watched capsule is unknown", async () => {
    const { store } = stewardSession();
    store.watch("fp-join");
    store.watch("fp-unknown");
    await store.refresh();
    expect(store.state.capsules["fp-join"]).toBeDefined();
    expect(store.state.capsules["fp-unknown"]).toBeUndefined();
    expect(store.state.lastError).toBe("");
  });
});
