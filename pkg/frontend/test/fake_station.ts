// In-memory stand-in for the station API speaking the documented wire
// bodies. Used to record and inspect exactly what the console sends.

import type { AccessRequest, CapsuleStatus, HumanTask, LedgerAccount } from "../src/types";

export interface FakeStationState {
  requests: AccessRequest[];
  tasks: HumanTask[];
  capsules: Record<string, CapsuleStatus>;
  ledger: LedgerAccount;
  viewer: string;
}

export function demoState(): FakeStationState {
  return {
    viewer: "carol",
    requests: [
      {
        id: "req-1",
        requester: "alice",
        dataset: "d-metrics",
        capsule_fp: "fp-brokered",
        status: "pending",
        decided_by: "",
        token: "",
      },
    ],
    tasks: [
      {
        id: "task-1",
        kind: "join_disambiguation",
        description:
          "Choose the join for fp-join.\nAlternatives:\n  [0] join L column 'work address' with R column 'address' (overlap 0.620)\n  [1] join L column 'home address' with R column 'address' (overlap 0.600)",
        price: 30,
        requester: "alice",
        status: "open",
        claimant: "",
        blocking_fingerprints: ["fp-join"],
        alternatives: [
          { description: "join L column 'work address' with R column 'address' (overlap 0.620)" },
          { description: "join L column 'home address' with R column 'address' (overlap 0.600)" },
        ],
        satisfiable: false,
      },
    ],
    capsules: {
      "fp-join": {
        fingerprint: "fp-join",
        submitter: "alice",
        status: "blocked",
        task_ids: ["task-1"],
        result_id: "",
        best_dos: 0,
      },
      "fp-brokered": {
        fingerprint: "fp-brokered",
        submitter: "alice",
        status: "satisfied",
        task_ids: [],
        result_id: "res-9",
        best_dos: 1,
      },
    },
    ledger: { user: "carol", balance: 0, escrowed: 0, available: 0 },
  };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function errorBody(error: string, detail: string, status: number): Response {
  return json({ error, detail }, status);
}

export function fakeFetch(state: FakeStationState) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const bare = path.split("?")[0];
    const auth = (init?.headers as Record<string, string>)?.Authorization ?? "";
    if (!auth.startsWith("Bearer ")) {
      return errorBody("AuthRequired", "unknown or missing bearer secret", 401);
    }

    if (method === "GET" && bare === "/access-requests") {
      return json({ requests: state.requests });
    }
    const decision = bare.match(/^\/access-requests\/([^/]+)\/decision$/);
    if (method === "POST" && decision) {
      const req = state.requests.find((r) => r.id === decision[1]);
      if (!req) return errorBody("NotFound", "no such request", 404);
      if (req.status !== "pending") return errorBody("AlreadyDecided", req.status, 409);
      const body = JSON.parse(String(init?.body ?? "{}"));
      req.status = body.decision === "approve" ? "approved" : "denied";
      req.decided_by = "owner-key";
      if (req.status === "approved") req.token = "tok-abc";
      return json(req);
    }
    if (method === "GET" && bare === "/tasks") {
      const mine = path.includes("mine=true");
      const tasks = mine
        ? state.tasks.filter((t) => t.requester === state.viewer)
        : state.tasks.filter((t) => t.status === "open" && t.requester !== state.viewer);
      return json({ tasks });
    }
    const claim = bare.match(/^\/tasks\/([^/]+)\/claim$/);
    if (method === "POST" && claim) {
      const task = state.tasks.find((t) => t.id === claim[1]);
      if (!task) return errorBody("NotFound", "no such task", 404);
      if (task.status !== "open") return errorBody("AlreadyClaimed", task.claimant, 409);
      task.status = "claimed";
      task.claimant = state.viewer;
      return json(task);
    }
    const answer = bare.match(/^\/tasks\/([^/]+)\/answer$/);
    if (method === "POST" && answer) {
      const task = state.tasks.find((t) => t.id === answer[1]);
      if (!task) return errorBody("NotFound", "no such task", 404);
      if (task.status !== "claimed") return errorBody("TaskNotClaimed", task.status, 400);
      if (task.claimant !== state.viewer) return errorBody("NotClaimant", task.claimant, 403);
      task.status = "answered";
      state.ledger.balance += task.price;
      state.ledger.available += task.price;
      for (const fp of task.blocking_fingerprints) {
        const capsule = state.capsules[fp];
        if (capsule) {
          capsule.status = "satisfied";
          capsule.task_ids = [];
          capsule.result_id = "res-join";
        }
      }
      return json({
        task_id: task.id,
        respondent: state.viewer,
        content: JSON.parse(String(init?.body ?? "{}")).content,
        timestamp: 1,
      });
    }
    if (method === "GET" && bare === "/ledger/me") {
      return json(state.ledger);
    }
    const capsule = bare.match(/^\/capsules\/([^/]+)$/);
    if (method === "GET" && capsule) {
      const status = state.capsules[capsule[1]];
      if (!status) return errorBody("NotFound", "capsule was never submitted", 404);
      return json(status);
    }
    return errorBody("NotFound", `unhandled ${method} ${bare}`, 404);
  };
}
