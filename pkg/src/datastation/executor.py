"""Budgeted capsule execution, result sealing, and mediated release.

Candidates come from discovery, get blended, then scored against the
capsule's satisfaction threshold. Evaluations are cached by (capsule
fingerprint, asset set) and cached winners are retried first on identical
requests. Every candidate evaluation appends one record to the audit log.

Results stay sealed until `release` has checked every contributing dataset:
open passes, closed stops non-owners, brokered requires a verifying
capability token, and differential-privacy contributors reduce a query
result to noised aggregates (and block model release outright).
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import records
from .blending import Ambiguity, Blender, BlendPlan, canon
from .capsule import TaskCapsule, fingerprint as capsule_fingerprint, trust_fails_only_why
from .catalog import Catalog
from .config import StationConfig
from .discovery import Candidate, DiscoveryIndex
from .errors import (
    AccessDenied,
    GovernanceViolation,
    JoinEmpty,
    NotFound,
    NoViablePlan,
    Revoked,
    SchemaMismatch,
)
from .policy import PolicyEngine
from .store import AssetStore
from .tabular import Table, infer_dtype, parse_csv


@dataclass(frozen=True)
class ExecutionBudget:
    max_candidates: int = 25
    max_seconds: float = 60.0


@dataclass(frozen=True)
class CacheEntry:
    capsule_fp: str
    assets: frozenset[str]
    dos: float
    outcome: str  # satisfied | unsatisfied
    timestamp: float


class ResultCache:
    def __init__(self):
        self._entries: dict[str, dict[frozenset[str], CacheEntry]] = {}
        self._lock = threading.Lock()

    def upsert(self, entry: CacheEntry) -> None:
        with self._lock:
            self._entries.setdefault(entry.capsule_fp, {})[entry.assets] = entry

    def lookup(self, capsule_fp: str) -> list[CacheEntry]:
        with self._lock:
            return list(self._entries.get(capsule_fp, {}).values())

    def satisfied_entry(self, capsule_fp: str) -> CacheEntry | None:
        for entry in self.lookup(capsule_fp):
            if entry.outcome == "satisfied":
                return entry
        return None

    def purge_assets(self, deleted: set[str]) -> None:
        with self._lock:
            for fp in list(self._entries):
                kept = {
                    assets: e
                    for assets, e in self._entries[fp].items()
                    if not (assets & deleted)
                }
                if kept:
                    self._entries[fp] = kept
                else:
                    del self._entries[fp]

    def referenced_assets(self) -> set[str]:
        with self._lock:
            out: set[str] = set()
            for per_fp in self._entries.values():
                for assets in per_fp:
                    out |= assets
            return out


class BaselineClassifier:
    """Nearest-centroid over standardized numeric features plus per-class
    modal values on text columns. Fully deterministic: ties break toward the
    higher prior, then the lexicographically smaller label."""

    model_class = "nearest_centroid"

    def __init__(self):
        self.label_column = ""
        self.numeric_features: list[str] = []
        self.text_features: list[str] = []
        self.means: dict[str, float] = {}
        self.stds: dict[str, float] = {}
        self.centroids: dict[str, dict[str, float]] = {}
        self.modes: dict[str, dict[str, str]] = {}
        self.priors: dict[str, float] = {}

    def fit(self, table: Table, label_column: str) -> "BaselineClassifier":
        self.label_column = table.columns[table.column_index(label_column)]
        labels = table.column_values(label_column)
        feature_cols = [c for c in table.columns if c != self.label_column]
        dtypes = {c: infer_dtype(table.column_values(c)) for c in feature_cols}
        numeric = [c for c in feature_cols if dtypes[c] == "number"]
        self.text_features = [c for c in feature_cols if dtypes[c] != "number"]

        self.numeric_features = []
        for col in numeric:
            values = np.array([_to_float(v) for v in table.column_values(col)])
            std = float(values.std())
            if std == 0.0:
                continue  # constant feature carries no signal, drop it
            self.numeric_features.append(col)
            self.means[col] = float(values.mean())
            self.stds[col] = std

        classes = sorted(set(labels))
        total = len(labels)
        for cls in classes:
            idx = [i for i, lbl in enumerate(labels) if lbl == cls]
            self.priors[cls] = len(idx) / total
            centroid = {}
            for col in self.numeric_features:
                values = table.column_values(col)
                standardized = [
                    (_to_float(values[i]) - self.means[col]) / self.stds[col] for i in idx
                ]
                centroid[col] = float(np.mean(standardized))
            self.centroids[cls] = centroid
            modes = {}
            for col in self.text_features:
                values = table.column_values(col)
                counts: dict[str, int] = {}
                for i in idx:
                    counts[values[i]] = counts.get(values[i], 0) + 1
                modes[col] = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
            self.modes[cls] = modes
        return self

    def predict(self, row: dict[str, str]) -> str:
        scored = []
        for cls in sorted(self.centroids):
            sq = 0.0
            for col in self.numeric_features:
                raw = row.get(col, "")
                try:
                    standardized = (float(raw) - self.means[col]) / self.stds[col]
                except (TypeError, ValueError):
                    standardized = 0.0  # impute at the training mean
                sq += (standardized - self.centroids[cls][col]) ** 2
            distance = math.sqrt(sq)
            for col in self.text_features:
                if row.get(col, "") != self.modes[cls][col]:
                    distance += 1.0
            scored.append((distance, -self.priors[cls], cls))
        scored.sort()
        return scored[0][2]

    def accuracy(self, table: Table) -> float:
        idx = table.column_index(self.label_column)
        hits = 0
        for row in table.rows:
            features = dict(zip(table.columns, row))
            if self.predict(features) == row[idx]:
                hits += 1
        return hits / len(table.rows) if table.rows else 0.0

    def to_record(self) -> dict:
        return {
            "model_class": self.model_class,
            "label_column": self.label_column,
            "numeric_features": self.numeric_features,
            "text_features": self.text_features,
            "means": self.means,
            "stds": self.stds,
            "centroids": self.centroids,
            "modes": self.modes,
            "priors": self.priors,
        }

    @classmethod
    def from_record(cls, record: dict) -> "BaselineClassifier":
        model = cls()
        model.label_column = record["label_column"]
        model.numeric_features = list(record["numeric_features"])
        model.text_features = list(record["text_features"])
        model.means = dict(record["means"])
        model.stds = dict(record["stds"])
        model.centroids = {k: dict(v) for k, v in record["centroids"].items()}
        model.modes = {k: dict(v) for k, v in record["modes"].items()}
        model.priors = dict(record["priors"])
        return model


def _to_float(value: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return 0.0


@dataclass
class TaskResult:
    id: str
    capsule_fp: str
    task_type: str
    submitter: str
    dos: float
    contributing: frozenset[str]
    release_state: str = "sealed"
    derived_table: str | None = None
    model_product: str | None = None
    raw_hits: int = 0
    search_matches: list[dict] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "capsule_fp": self.capsule_fp,
            "task_type": self.task_type,
            "dos": self.dos,
            "contributing": sorted(self.contributing),
            "release_state": self.release_state,
            "derived_table": self.derived_table,
            "model_product": self.model_product,
            "raw_hits": self.raw_hits,
        }


@dataclass
class Outcome:
    status: str  # satisfied | blocked | unsatisfied
    result: TaskResult | None = None
    task_ids: list[str] = field(default_factory=list)
    best_dos: float = 0.0

    def to_record(self) -> dict:
        return {
            "status": self.status,
            "result": self.result.to_record() if self.result else None,
            "task_ids": self.task_ids,
            "best_dos": self.best_dos,
        }


class Executor:
    def __init__(
        self,
        store: AssetStore,
        catalog: Catalog,
        policy: PolicyEngine,
        discovery: DiscoveryIndex,
        blender: Blender,
        config: StationConfig,
        idgen: Callable[[], str],
        clock: Callable[[], float],
        audit_path: Path,
        key_of: Callable[[str], str],
        on_materialized: Callable[[str], None] | None = None,
    ):
        self._store = store
        self._catalog = catalog
        self._policy = policy
        self._discovery = discovery
        self._blender = blender
        self._config = config
        self._idgen = idgen
        self._clock = clock
        self._audit_path = Path(audit_path)
        self._key_of = key_of
        self._on_materialized = on_materialized or (lambda _aid: None)
        self.cache = ResultCache()
        self._results: dict[str, TaskResult] = {}
        self._results_by_fp: dict[tuple[str, str], str] = {}  # (fingerprint, submitter)
        self._purged_results: set[str] = set()  # removed by deletion cascades
        self._lock = threading.RLock()
        self._audit_lock = threading.Lock()
        self.materialize_count = 0
        # Human-task generation is wired in by the station to avoid a module cycle.
        self.generate_tasks: Callable[[TaskCapsule, list[Ambiguity]], list[str]] = (
            lambda _c, _a: []
        )
        store.on_delete(self._purge_deleted)

    # -- audit -------------------------------------------------------------------

    def _audit(self, fp: str, assets: tuple[str, ...], governance: str, dos: float) -> None:
        record = {
            "ts": self._clock(),
            "fingerprint": fp,
            "assets": sorted(assets),
            "governance": governance,
            "dos": round(dos, 9),
        }
        with self._audit_lock:
            with self._audit_path.open("a", encoding="utf-8") as fh:
                fh.write(records.dumps(record) + "\n")

    def audit_lines(self) -> list[str]:
        if not self._audit_path.exists():
            return []
        return self._audit_path.read_text(encoding="utf-8").splitlines()

    # -- execution ------------------------------------------------------------------

    def execute(
        self, capsule: TaskCapsule, user: str, budget: ExecutionBudget | None = None
    ) -> Outcome:
        budget = budget or ExecutionBudget(self._config.max_candidates, self._config.max_seconds)
        fp = capsule_fingerprint(capsule)
        cached = self.cache.satisfied_entry(fp)
        if cached is not None:
            with self._lock:
                result_id = self._results_by_fp.get((fp, user))
                if result_id and result_id in self._results:
                    result = self._results[result_id]
                    return Outcome(status="satisfied", result=result, best_dos=result.dos)
                donor_key = next((k for k in self._results_by_fp if k[0] == fp), None)
                if donor_key and self._results_by_fp[donor_key] in self._results:
                    # Same fingerprint, different submitter: reuse the
                    # evaluation but seal a result of their own.
                    donor = self._results[self._results_by_fp[donor_key]]
                    result = replace(
                        donor, id=self._idgen(), submitter=user, release_state="sealed"
                    )
                    self._results[result.id] = result
                    self._results_by_fp[(fp, user)] = result.id
                    return Outcome(status="satisfied", result=result, best_dos=result.dos)
        deadline = time.monotonic() + budget.max_seconds
        candidates = self._discovery.discover(capsule, user)[: budget.max_candidates]
        if capsule.task_type == "search":
            return self._execute_search(capsule, user, fp, candidates)
        candidates = self._promote_cached(fp, candidates, capsule.dos.threshold)

        best = 0.0
        ambiguities: list[Ambiguity] = []
        for candidate in candidates:
            if time.monotonic() > deadline:
                break  # budget exhausted behaves as unsatisfied-so-far
            dos, ambiguity, product_id = self._evaluate_candidate(capsule, user, fp, candidate)
            if ambiguity is not None:
                ambiguities.append(ambiguity)
                continue
            if dos is None:
                continue
            best = max(best, dos)
            if dos >= capsule.dos.threshold:
                result = self._build_result(capsule, user, fp, candidate, dos, product_id)
                return Outcome(status="satisfied", result=result, best_dos=dos)
        if not candidates and capsule.trust.require_why_profile:
            ambiguities.extend(self._missing_profile_blocks(capsule, user, fp))
        if ambiguities:
            task_ids = self.generate_tasks(capsule, ambiguities)
            if task_ids:
                return Outcome(status="blocked", task_ids=task_ids, best_dos=best)
        return Outcome(status="unsatisfied", best_dos=best)

    def _promote_cached(
        self, fp: str, candidates: list[Candidate], threshold: float
    ) -> list[Candidate]:
        prior = {e.assets: e for e in self.cache.lookup(fp)}
        promoted, rest = [], []
        for cand in candidates:
            entry = prior.get(frozenset(cand.assets))
            if entry is not None and entry.dos >= threshold:
                promoted.append(cand)
            else:
                rest.append(cand)
        return promoted + rest

    def _evaluate_candidate(
        self, capsule: TaskCapsule, user: str, fp: str, candidate: Candidate
    ) -> tuple[float | None, Ambiguity | None, str | None]:
        """(dos, None, table id) on evaluation, (None, ambiguity, None) on a
        block, (None, None, None) when the candidate is skipped."""
        try:
            plan = self._blender.synthesize(candidate, capsule)
        except NoViablePlan:
            self._audit(fp, candidate.assets, "no_plan", 0.0)
            return None, None, None
        except Exception:
            self._audit(fp, candidate.assets, "error", 0.0)
            return None, None, None
        if isinstance(plan, Ambiguity):
            self._audit(fp, candidate.assets, "ambiguous", 0.0)
            return None, plan, None
        model_class = capsule.payload.get("model_class", "") if capsule.task_type == "classify" else ""
        violations = self._policy.check_governance(plan, capsule.task_type, model_class)
        if violations:
            verdict = "violation:" + ",".join(sorted({v.kind for v in violations}))
            self._audit(fp, candidate.assets, verdict, 0.0)
            self._cache_entry(fp, candidate.assets, 0.0, "unsatisfied")
            return None, None, None
        try:
            product = self._blender.materialize(plan, capsule.task_type, model_class)
            self.materialize_count += 1
            self._on_materialized(product.id)
            table = self._store.read_table(product.id)
            dos = self.evaluate_dos(capsule.task_type, table, capsule.payload, plan)
        except JoinEmpty:
            self._audit(fp, candidate.assets, "join_empty", 0.0)
            self._cache_entry(fp, candidate.assets, 0.0, "unsatisfied")
            return None, None, None
        except (GovernanceViolation, SchemaMismatch) as exc:
            self._audit(fp, candidate.assets, f"error:{exc.code}", 0.0)
            return None, None, None
        outcome = "satisfied" if dos >= capsule.dos.threshold else "unsatisfied"
        self._audit(fp, candidate.assets, "pass", dos)
        self._cache_entry(fp, candidate.assets, dos, outcome)
        return dos, None, product.id

    def _cache_entry(self, fp: str, assets: tuple[str, ...], dos: float, outcome: str) -> None:
        self.cache.upsert(
            CacheEntry(
                capsule_fp=fp,
                assets=frozenset(assets),
                dos=dos,
                outcome=outcome,
                timestamp=self._clock(),
            )
        )

    def _build_result(
        self,
        capsule: TaskCapsule,
        user: str,
        fp: str,
        candidate: Candidate,
        dos: float,
        product_id: str,
    ) -> TaskResult:
        contributing = frozenset().union(
            *(self._store.originals_of(aid) for aid in candidate.assets)
        )
        model_id = None
        if capsule.task_type == "classify":
            table = self._store.read_table(product_id)
            model = BaselineClassifier().fit(table, capsule.payload["label_column"])
            model_product = self._store.register_derived(
                kind="model",
                parents=[product_id],
                producing_op=f"train({model.model_class})",
                content=(records.dumps(model.to_record()) + "\n").encode("utf-8"),
            )
            self._catalog.profile(model_product.id)
            model_id = model_product.id
        result = TaskResult(
            id=self._idgen(),
            capsule_fp=fp,
            task_type=capsule.task_type,
            submitter=user,
            dos=dos,
            contributing=contributing,
            derived_table=product_id,
            model_product=model_id,
        )
        with self._lock:
            self._results[result.id] = result
            self._results_by_fp[(fp, user)] = result.id
        return result

    def _execute_search(
        self, capsule: TaskCapsule, user: str, fp: str, candidates: list[Candidate]
    ) -> Outcome:
        matches = []
        for cand in candidates:
            asset_id = cand.assets[0]
            profile = self._catalog.get(asset_id)
            self._audit(fp, cand.assets, "pass", cand.breakdown["keyword"])
            matches.append(
                {
                    "asset": asset_id,
                    "score": cand.breakdown["keyword"],
                    "columns": [
                        {"name": c.name, "dtype": c.dtype} for c in profile.what
                    ],
                }
            )
        hits = len(matches)
        threshold = capsule.dos.threshold
        dos = min(hits / threshold, 1.0) if threshold > 0 else 1.0
        assets = frozenset(m["asset"] for m in matches)
        outcome = "satisfied" if hits >= threshold else "unsatisfied"
        if assets:
            self.cache.upsert(
                CacheEntry(fp, assets, dos, outcome, self._clock())
            )
        if hits >= threshold:
            result = TaskResult(
                id=self._idgen(),
                capsule_fp=fp,
                task_type="search",
                submitter=user,
                dos=dos,
                contributing=assets,
                raw_hits=hits,
                search_matches=matches,
            )
            with self._lock:
                self._results[result.id] = result
                self._results_by_fp[(fp, user)] = result.id
            return Outcome(status="satisfied", result=result, best_dos=dos)
        return Outcome(status="unsatisfied", best_dos=dos)

    def _missing_profile_blocks(
        self, capsule: TaskCapsule, user: str, fp: str, cap: int = 3
    ) -> list[Ambiguity]:
        out = []
        for asset_id in sorted(self._catalog.profiled_ids()):
            if len(out) >= cap:
                break
            if not self._store.exists(asset_id) or not self._store.get(asset_id).is_original:
                continue
            if not self._discovery.visible_to(user, asset_id):
                continue
            if trust_fails_only_why(capsule.trust, asset_id, self._catalog, self._store):
                out.append(
                    Ambiguity(
                        kind="missing_profile",
                        alternatives=[
                            {
                                "description": f"dataset {asset_id} lacks a human why-profile",
                                "asset": asset_id,
                            }
                        ],
                        capsule_fp=fp,
                        context_key=f"why:{asset_id}",
                    )
                )
        return out

    # -- degree of satisfaction --------------------------------------------------------

    def evaluate_dos(
        self, task_type: str, table: Table, payload: dict, plan: BlendPlan | None = None
    ) -> float:
        if task_type == "classify":
            label = payload["label_column"]
            if not table.has_column(label):
                raise SchemaMismatch(f"input lacks label column {label!r}")
            test = parse_csv(payload["test_data"].encode("utf-8"))
            for col in test.columns:
                if not table.has_column(col):
                    raise SchemaMismatch(f"input lacks test column {col!r}")
            model = BaselineClassifier().fit(table, label)
            return model.accuracy(test)
        if task_type == "qbe":
            attrs = payload["attributes"]
            for attr in attrs:
                if not table.has_column(attr):
                    raise SchemaMismatch(f"input lacks attribute {attr!r}")
            transforms = {}
            if plan is not None:
                transforms = {m.target.lower(): m.transform for m in plan.mapping}
            matched = 0
            rows = payload["example_rows"]
            for example in rows:
                wanted = [
                    canon(transforms.get(attr.lower(), "identity"), value)
                    for attr, value in zip(attrs, example)
                ]
                indices = [table.column_index(a) for a in attrs]
                if any(all(row[i] == w for i, w in zip(indices, wanted)) for row in table.rows):
                    matched += 1
            return matched / len(rows) if rows else 0.0
        raise SchemaMismatch(f"evaluate_dos does not handle task type {task_type!r}")

    # -- results ----------------------------------------------------------------------

    def result_of(self, result_id: str) -> TaskResult:
        with self._lock:
            result = self._results.get(result_id)
            if result is None and result_id in self._purged_results:
                raise Revoked(f"result {result_id} was purged by a deletion cascade")
        if result is None:
            raise NotFound(f"result {result_id} does not exist")
        return result

    def release(self, result_id: str, user: str, token: str | None = None) -> dict:
        result = self.result_of(result_id)
        if result.submitter != user:
            raise AccessDenied("result belongs to a different submitter")
        missing = {aid for aid in result.contributing if not self._store.exists(aid)}
        if missing:
            with self._lock:
                self._results.pop(result_id, None)
                self._purged_results.add(result_id)
                self._results_by_fp.pop((result.capsule_fp, result.submitter), None)
            raise Revoked(f"contributing datasets deleted: {', '.join(sorted(missing))}")

        user_key = self._key_of(user)
        brokered_needed: set[str] = set()
        dp_datasets: list[str] = []
        for dataset in sorted(result.contributing):
            policy = self._policy.get(dataset)
            owner = self._policy.is_owner(user_key, dataset)
            if policy.access == "closed" and not owner:
                raise AccessDenied(f"Closed: dataset {dataset}")
            if policy.access == "brokered" and not owner:
                brokered_needed.add(dataset)
            if policy.dp_filter:
                dp_datasets.append(dataset)

        if result.task_type == "classify" and dp_datasets:
            raise AccessDenied(
                "DpForbidsModelRelease: contributors "
                + ", ".join(dp_datasets)
                + " mandate differential privacy"
            )
        if brokered_needed:
            if not token:
                raise AccessDenied(
                    "NeedsToken: brokered datasets " + ", ".join(sorted(brokered_needed))
                )
            if not self._policy.token_still_valid(token, user, brokered_needed):
                access = self._policy.verify_and_consume(token, user, brokered_needed)
                raise AccessDenied(access.reason or "token rejected")

        content = self._render_content(result, dp_datasets)

        if brokered_needed:
            access = self._policy.verify_and_consume(token or "", user, brokered_needed)
            if not access.allowed:
                raise AccessDenied(access.reason)
        result.release_state = "released"
        self._catalog.record_result_access(set(result.contributing), user)
        return content

    def _render_content(self, result: TaskResult, dp_datasets: list[str]) -> dict:
        if result.task_type == "search":
            return {"matches": result.search_matches, "hits": result.raw_hits}
        if result.task_type == "classify":
            return {
                "model": result.model_product,
                "accuracy": result.dos,
                "predict": f"/models/{result.model_product}/predict",
            }
        table = self._store.read_table(result.derived_table)
        if not dp_datasets:
            return {
                "table": {"columns": table.columns, "rows": table.rows},
                "coverage": result.dos,
            }
        # Privacy-filtered contributors: only noised aggregates leave the station.
        aggregates: dict[str, float] = {}
        count = float(len(table.rows))
        for dataset in dp_datasets:
            count = self._policy.apply_dp(dataset, count, sensitivity=1.0)
        aggregates["row_count"] = count
        for col in table.columns:
            values = [v for v in table.column_values(col) if v.strip()]
            if values and infer_dtype(values) == "number":
                mean = float(np.mean([float(v) for v in values]))
                for dataset in dp_datasets:
                    mean = self._policy.apply_dp(dataset, mean, sensitivity=1.0)
                aggregates[f"mean({col})"] = mean
        return {"aggregates": aggregates, "coverage": result.dos}

    # -- model serving -----------------------------------------------------------------

    def predict(self, model_id: str, row: dict[str, str]) -> str:
        if not self._store.exists(model_id):
            if self._store.tombstone_of(model_id) is not None:
                raise Revoked(f"model {model_id} was removed by a deletion cascade")
            raise NotFound(f"model {model_id} does not exist")
        asset = self._store.get(model_id)
        if asset.is_original or asset.kind != "model":
            raise NotFound(f"asset {model_id} is not a model")
        record = records.loads(self._store.read_content(model_id))
        model = BaselineClassifier.from_record(record)
        return model.predict({str(k): str(v) for k, v in row.items()})

    # -- lifecycle hooks ------------------------------------------------------------------

    def _purge_deleted(self, deleted: set[str]) -> None:
        self.cache.purge_assets(deleted)
        with self._lock:
            doomed = [
                rid
                for rid, r in self._results.items()
                if (r.contributing & deleted)
                or (r.derived_table in deleted)
                or (r.model_product in deleted)
            ]
            for rid in doomed:
                result = self._results.pop(rid)
                self._purged_results.add(rid)
                self._results_by_fp.pop((result.capsule_fp, result.submitter), None)
