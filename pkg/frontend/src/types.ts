// Wire shapes of the station API records the console consumes.

export interface AccessRequest {
  id: string;
  requester: string;
  dataset: string;
  capsule_fp: string;
  status: "pending" | "approved" | "denied";
  decided_by: string;
  token: string;
}

export interface TaskAlternative {
  description: string;
  score?: number;
  asset?: string;
  left_column?: string;
  right_column?: string;
}

export interface HumanTask {
  id: string;
  kind: "join_disambiguation" | "why_profile_request";
  description: string;
  price: number;
  requester: string;
  status: "open" | "claimed" | "answered" | "expired";
  claimant: string;
  blocking_fingerprints: string[];
  alternatives: TaskAlternative[];
  satisfiable: boolean;
}

export interface LedgerAccount {
  user: string;
  balance: number;
  escrowed: number;
  available: number;
}

export interface CapsuleStatus {
  fingerprint: string;
  submitter: string;
  status: "running" | "blocked" | "satisfied" | "unsatisfied";
  task_ids: string[];
  result_id: string;
  best_dos: number;
}

export interface ConsoleConfig {
  baseUrl: string;
  identitySecret: string;
  pollIntervalMs?: number; // default 5000
}
