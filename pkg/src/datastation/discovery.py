"""Dataset discovery: full-text tokens, column sketches, linkage graph.

Indexes are rebuilt per asset whenever the catalog (re)profiles it. A
linkage edge between two columns exists iff their sketch-estimated Jaccard
clears the configured join threshold and their dtypes agree. Everything a
caller gets back is schema-level: asset ids, scores, join paths; never a
row value.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

from . import sketches
from .capsule import TaskCapsule, check_trust
from .catalog import Catalog, tokenize
from .config import StationConfig
from .errors import NotProfiled
from .policy import PolicyEngine
from .store import AssetStore
from .tabular import infer_dtype


@dataclass(frozen=True)
class JoinPath:
    left_asset: str
    left_column: str
    right_asset: str
    right_column: str
    weight: float

    def to_record(self) -> dict:
        return {
            "left_asset": self.left_asset,
            "left_column": self.left_column,
            "right_asset": self.right_asset,
            "right_column": self.right_column,
            "weight": self.weight,
        }


@dataclass
class Candidate:
    assets: tuple[str, ...]
    score: float
    breakdown: dict[str, float]
    join: JoinPath | None = None

    def to_record(self) -> dict:
        return {
            "assets": list(self.assets),
            "score": self.score,
            "breakdown": self.breakdown,
            "join": self.join.to_record() if self.join else None,
        }


class DiscoveryIndex:
    def __init__(
        self,
        store: AssetStore,
        catalog: Catalog,
        policy: PolicyEngine,
        config: StationConfig,
        key_of: Callable[[str], str],
    ):
        self._store = store
        self._catalog = catalog
        self._policy = policy
        self._config = config
        self._key_of = key_of  # user id -> key fingerprint ('' for plain users)
        self._tokens: dict[str, set[tuple[str, str]]] = {}
        self._column_sketches: dict[tuple[str, str], list[int]] = {}
        self._column_dtypes: dict[tuple[str, str], str] = {}
        self._edges: dict[tuple[str, str, str, str], float] = {}
        self._annotations: dict[tuple[str, str], tuple[str, str]] = {}
        self._lock = threading.RLock()
        store.on_delete(self.remove_all)

    # -- maintenance -------------------------------------------------------------

    def index(self, asset_id: str) -> None:
        if not self._catalog.has_profile(asset_id):
            raise NotProfiled(f"asset {asset_id} must be profiled before indexing")
        profile = self._catalog.get(asset_id)
        with self._lock:
            self._drop(asset_id)
            for col in profile.what:
                for token in col.name_tokens:
                    self._tokens.setdefault(token, set()).add((asset_id, f"column:{col.name}"))
                for value, _ in col.top_values:
                    for token in tokenize(value):
                        self._tokens.setdefault(token, set()).add((asset_id, f"value:{col.name}"))
                key = (asset_id, col.name)
                self._column_sketches[key] = col.sketch
                self._column_dtypes[key] = col.dtype
            for token in tokenize(profile.why.get("text", "")):
                self._tokens.setdefault(token, set()).add((asset_id, "why"))
            self._recompute_edges(asset_id)

    def _drop(self, asset_id: str) -> None:
        for posting in self._tokens.values():
            posting -= {p for p in posting if p[0] == asset_id}
        self._column_sketches = {
            k: v for k, v in self._column_sketches.items() if k[0] != asset_id
        }
        self._column_dtypes = {k: v for k, v in self._column_dtypes.items() if k[0] != asset_id}
        self._edges = {
            k: v for k, v in self._edges.items() if k[0] != asset_id and k[2] != asset_id
        }

    def _recompute_edges(self, asset_id: str) -> None:
        mine = [(a, c) for (a, c) in self._column_sketches if a == asset_id]
        others = [(a, c) for (a, c) in self._column_sketches if a != asset_id]
        for a, ca in mine:
            for b, cb in others:
                if self._column_dtypes[(a, ca)] != self._column_dtypes[(b, cb)]:
                    continue
                est = sketches.jaccard_estimate(
                    self._column_sketches[(a, ca)], self._column_sketches[(b, cb)]
                )
                if est >= self._config.join_threshold:
                    key = (a, ca, b, cb) if a < b else (b, cb, a, ca)
                    self._edges[key] = est

    def remove_all(self, asset_ids: set[str]) -> None:
        with self._lock:
            for aid in asset_ids:
                self._drop(aid)
            self._annotations = {
                k: v for k, v in self._annotations.items() if not (set(k) & asset_ids)
            }

    # -- human answers -------------------------------------------------------------

    def annotate_join(self, asset_a: str, column_a: str, asset_b: str, column_b: str) -> None:
        """Record a human's join choice; applies corpus-wide from now on."""
        with self._lock:
            if asset_a <= asset_b:
                self._annotations[(asset_a, asset_b)] = (column_a, column_b)
            else:
                self._annotations[(asset_b, asset_a)] = (column_b, column_a)

    def annotation_for(self, asset_a: str, asset_b: str) -> tuple[str, str] | None:
        """Preferred (column_a, column_b) for this pair, in argument order."""
        with self._lock:
            if asset_a <= asset_b:
                return self._annotations.get((asset_a, asset_b))
            hit = self._annotations.get((asset_b, asset_a))
            return (hit[1], hit[0]) if hit else None

    def edges_between(self, asset_a: str, asset_b: str) -> list[JoinPath]:
        with self._lock:
            out = []
            for (a, ca, b, cb), w in self._edges.items():
                if {a, b} == {asset_a, asset_b}:
                    if a == asset_a:
                        out.append(JoinPath(a, ca, b, cb, w))
                    else:
                        out.append(JoinPath(b, cb, a, ca, w))
            return sorted(out, key=lambda e: (-e.weight, e.left_column, e.right_column))

    # -- visibility ---------------------------------------------------------------

    def visible_to(self, user: str, asset_id: str) -> bool:
        user_key = self._key_of(user)
        asset = self._store.get(asset_id)
        if asset.is_original:
            return self._policy.dataset_visible(user_key, asset_id)
        return all(
            self._policy.dataset_visible(user_key, oid)
            for oid in self._store.originals_of(asset_id)
        )

    def _eligible(self, capsule: TaskCapsule, user: str) -> list[str]:
        user_key = self._key_of(user)
        out = []
        for asset_id in self._catalog.profiled_ids():
            if not self._store.exists(asset_id):
                continue
            asset = self._store.get(asset_id)
            if not asset.is_original or (hasattr(asset, "encrypted") and asset.encrypted):
                # Execution reads rows; opaque/derived assets are not training
                # or query inputs here (derived content re-enters via parents).
                continue
            if not self.visible_to(user, asset_id):
                continue
            if not self._policy.is_owner(user_key, asset_id):
                if not self._policy.get(asset_id).allows_task(capsule.task_type):
                    continue
            if not check_trust(capsule.trust, asset_id, self._catalog, self._store):
                continue
            out.append(asset_id)
        return sorted(out)

    # -- search --------------------------------------------------------------------

    def discover(self, capsule: TaskCapsule, user: str) -> list[Candidate]:
        with self._lock:
            eligible = self._eligible(capsule, user)
            if capsule.task_type == "search":
                candidates = self._search_candidates(capsule, eligible)
            elif capsule.task_type == "qbe":
                candidates = self._tabular_candidates(
                    capsule, eligible, capsule.payload["attributes"],
                    [list(r) for r in capsule.payload["example_rows"]],
                )
            else:
                table = capsule.test_table()
                rows = [list(r) for r in table.rows]
                candidates = self._tabular_candidates(capsule, eligible, table.columns, rows)
        candidates.sort(key=lambda c: (-c.score, c.assets))
        return candidates[: self._config.max_candidates]

    def _score(self, keyword: float, coverage: float, overlap: float) -> float:
        cfg = self._config
        return (
            cfg.weight_keyword * keyword
            + cfg.weight_coverage * coverage
            + cfg.weight_overlap * overlap
        )

    def _asset_tokens(self, asset_id: str) -> set[str]:
        return {t for t, posting in self._tokens.items() if any(p[0] == asset_id for p in posting)}

    def _search_candidates(self, capsule: TaskCapsule, eligible: list[str]) -> list[Candidate]:
        keywords = capsule.payload["keywords"]
        out = []
        for asset_id in eligible:
            tokens = self._asset_tokens(asset_id)
            matched = sum(1 for kw in keywords if set(tokenize(kw)) <= tokens and tokenize(kw))
            if matched == 0:
                continue
            kw_score = matched / len(keywords)
            out.append(
                Candidate(
                    assets=(asset_id,),
                    score=self._score(kw_score, 0.0, 0.0),
                    breakdown={"keyword": kw_score, "column_coverage": 0.0, "value_overlap": 0.0},
                )
            )
        return out

    def _tabular_candidates(
        self,
        capsule: TaskCapsule,
        eligible: list[str],
        attributes: list[str],
        example_rows: list[list[str]],
    ) -> list[Candidate]:
        # Sketch the capsule's own example/test values once per attribute.
        example_sketches: dict[str, list[int]] = {}
        example_dtypes: dict[str, str] = {}
        for i, attr in enumerate(attributes):
            values = [row[i] for row in example_rows if i < len(row)]
            dtype = infer_dtype(values)
            example_dtypes[attr.lower()] = dtype
            normalized = {
                sketches.normalize_value(v, dtype) for v in values if v.strip()
            }
            example_sketches[attr.lower()] = sketches.sketch_of(normalized)

        singles: dict[str, Candidate] = {}
        coverage_by_asset: dict[str, float] = {}
        for asset_id in eligible:
            covered, overlap = self._coverage([asset_id], attributes, example_sketches)
            coverage_by_asset[asset_id] = covered
            if covered <= 0:
                continue
            singles[asset_id] = Candidate(
                assets=(asset_id,),
                score=self._score(0.0, covered, overlap),
                breakdown={"keyword": 0.0, "column_coverage": covered, "value_overlap": overlap},
            )

        pairs: dict[tuple[str, str], Candidate] = {}
        eligible_set = set(eligible)
        for (a, ca, b, cb), weight in self._edges.items():
            if a not in eligible_set or b not in eligible_set:
                continue
            covered, overlap = self._coverage([a, b], attributes, example_sketches)
            if covered <= max(coverage_by_asset.get(a, 0.0), coverage_by_asset.get(b, 0.0)):
                continue
            join = JoinPath(a, ca, b, cb, weight)
            key = (a, b)
            cand = Candidate(
                assets=(a, b),
                score=self._score(0.0, covered, overlap),
                breakdown={"keyword": 0.0, "column_coverage": covered, "value_overlap": overlap},
                join=join,
            )
            prior = pairs.get(key)
            if prior is None or join.weight > prior.join.weight:
                pairs[key] = cand
        return list(singles.values()) + list(pairs.values())

    def _coverage(
        self,
        asset_ids: list[str],
        attributes: list[str],
        example_sketches: dict[str, list[int]],
    ) -> tuple[float, float]:
        """(fraction of attributes covered, mean sketch overlap on covered ones)."""
        covered = 0
        overlaps: list[float] = []
        for attr in attributes:
            lowered = attr.lower()
            best: float | None = None
            for asset_id in asset_ids:
                for (aid, col), sketch in self._column_sketches.items():
                    if aid != asset_id or col.lower() != lowered:
                        continue
                    est = sketches.jaccard_estimate(example_sketches[lowered], sketch)
                    best = est if best is None else max(best, est)
            if best is not None:
                covered += 1
                overlaps.append(best)
        if not attributes:
            return 0.0, 0.0
        coverage = covered / len(attributes)
        overlap = sum(overlaps) / len(overlaps) if overlaps else 0.0
        return coverage, overlap
