"""Asset catalog: the six per-asset profiles and catalog queries.

Profiles are the shared vocabulary between contributors, users, and the
engine itself. The what-profile is a pure function of (content bytes,
schema): profiling the same content twice writes byte-identical records,
which downstream sketch comparisons and cache keys rely on.

Export format: one canonical record per line with fields
asset, what, who, how, where, when, why, ext.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from typing import Callable

from . import records, sketches
from .errors import EmptyText, NotFound
from .store import AssetStore, Dataset, ProfileSeed

# Columns with more distinct values than this get sketch-estimated counts.
EXACT_DISTINCT_CAP = 10_000
TOP_VALUES = 5

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class ColumnProfile:
    name: str
    dtype: str
    row_count: int
    distinct_estimate: int
    minimum: str | None
    maximum: str | None
    top_values: list[tuple[str, int]]
    sketch: list[int]
    name_tokens: list[str]

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "dtype": self.dtype,
            "row_count": self.row_count,
            "distinct_estimate": self.distinct_estimate,
            "min": self.minimum,
            "max": self.maximum,
            "top_values": [[v, c] for v, c in self.top_values],
            "sketch": self.sketch,
            "name_tokens": self.name_tokens,
        }


@dataclass
class ProfileSet:
    asset_id: str
    what: list[ColumnProfile]
    who: dict
    how: dict
    where: dict
    when: dict
    why: dict
    ext: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "asset": self.asset_id,
            "what": [c.to_record() for c in self.what],
            "who": self.who,
            "how": self.how,
            "where": self.where,
            "when": self.when,
            "why": self.why,
            "ext": self.ext,
        }

    def column(self, name: str) -> ColumnProfile | None:
        lowered = name.lower()
        for col in self.what:
            if col.name.lower() == lowered:
                return col
        return None

    @property
    def why_is_human(self) -> bool:
        return self.why.get("provenance") == "human"


@dataclass
class CatalogQuery:
    creator_in: set[str] | None = None
    created_after: float | None = None
    requires_why: bool = False
    max_depth: int | None = None
    keyword: str | None = None


class Catalog:
    """Holds one ProfileSet per live asset; populated by the metadata engine."""

    def __init__(
        self,
        store: AssetStore,
        pii_names: Callable[[], frozenset[str]],
        access_mode_of: Callable[[str], str],
        visible_to: Callable[[str, str], bool],
    ):
        self._store = store
        self._pii_names = pii_names
        self._access_mode_of = access_mode_of
        self._visible_to = visible_to
        self._profiles: dict[str, ProfileSet] = {}
        self._lock = threading.RLock()
        self._why_hooks: list[Callable[[str], None]] = []
        store.on_delete(self.tombstone_all)

    def on_why_set(self, hook: Callable[[str], None]) -> None:
        self._why_hooks.append(hook)

    # -- profiling ------------------------------------------------------------

    def profile(self, asset_id: str, seed: ProfileSeed | None = None) -> ProfileSet:
        asset = self._store.get(asset_id)
        with self._lock:
            prior = self._profiles.get(asset_id)
            what = self._what_profile(asset_id)
            if isinstance(asset, Dataset):
                producer = asset.owner_key
                how = {"producing_op": "", "plan_summary": ""}
            else:
                producer = "station"
                how = {"producing_op": asset.producing_op, "plan_summary": asset.producing_op}
            who = {
                "producer": producer,
                "users": list(prior.who.get("users", [])) if prior else [],
            }
            where = {
                "content_ref": asset.content_ref,
                "access_mode": self._access_mode_of(asset_id),
            }
            when = {
                "created_at": asset.created_at,
                "modified_at": asset.modified_at,
                "valid_from": None,
                "valid_to": None,
            }
            if prior:
                why = dict(prior.why)
            elif seed and seed.why_text.strip():
                why = {
                    "text": seed.why_text.strip(),
                    "author": seed.why_author,
                    "provenance": "human",
                }
            else:
                why = {"text": "", "author": "", "provenance": "none"}
            profile = ProfileSet(
                asset_id=asset_id, what=what, who=who, how=how,
                where=where, when=when, why=why,
            )
            if prior:
                profile.ext = dict(prior.ext)
            self._profiles[asset_id] = profile
            return profile

    def set_plan_summary(self, asset_id: str, summary: str) -> None:
        profile = self.get(asset_id)
        with self._lock:
            profile.how["plan_summary"] = summary

    def _what_profile(self, asset_id: str) -> list[ColumnProfile]:
        asset = self._store.get(asset_id)
        pii = self._pii_names()
        if isinstance(asset, Dataset) and asset.encrypted:
            # Opaque blob: schema comes from contributor metadata, values never seen.
            return [
                ColumnProfile(
                    name=c.name, dtype=c.dtype, row_count=0, distinct_estimate=0,
                    minimum=None, maximum=None, top_values=[],
                    sketch=[sketches.EMPTY_SLOT] * sketches.SKETCH_K,
                    name_tokens=tokenize(c.name),
                )
                for c in asset.schema
            ]
        if not asset.is_original and asset.kind in ("model", "report"):
            return []
        table = self._store.read_table(asset_id)
        if isinstance(asset, Dataset):
            schema = asset.schema
        else:
            from .tabular import infer_schema

            schema = infer_schema(table)
        profiles = []
        for spec in schema:
            values = table.column_values(spec.name)
            non_empty = [v for v in values if v.strip()]
            normalized = {sketches.normalize_value(v, spec.dtype) for v in non_empty}
            sketch = sketches.sketch_of(normalized)
            if len(normalized) <= EXACT_DISTINCT_CAP:
                distinct = len(normalized)
            else:
                distinct = sketches.distinct_estimate(sketch)
            minimum = maximum = None
            if spec.dtype == "number" and non_empty:
                as_floats = sorted(float(v) for v in non_empty)
                minimum, maximum = repr(as_floats[0]), repr(as_floats[-1])
            elif spec.dtype == "date" and non_empty:
                iso = sorted(_to_iso(v) for v in non_empty)
                minimum, maximum = iso[0], iso[-1]
            if spec.name.lower() in pii:
                top: list[tuple[str, int]] = []
            else:
                counts: dict[str, int] = {}
                for v in non_empty:
                    counts[v] = counts.get(v, 0) + 1
                top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:TOP_VALUES]
            profiles.append(
                ColumnProfile(
                    name=spec.name, dtype=spec.dtype, row_count=len(values),
                    distinct_estimate=distinct, minimum=minimum, maximum=maximum,
                    top_values=top, sketch=sketch, name_tokens=tokenize(spec.name),
                )
            )
        return profiles

    # -- why profile ------------------------------------------------------------

    def upsert_why(self, asset_id: str, text: str, author: str) -> ProfileSet:
        if not text or not text.strip():
            raise EmptyText("why text must be non-empty")
        profile = self.get(asset_id)
        with self._lock:
            profile.why = {"text": text.strip(), "author": author, "provenance": "human"}
            profile.when["modified_at"] = max(
                profile.when["modified_at"], self._store.get(asset_id).modified_at
            )
        for hook in self._why_hooks:
            hook(asset_id)
        return profile

    # -- reads ---------------------------------------------------------------------

    def get(self, asset_id: str) -> ProfileSet:
        with self._lock:
            profile = self._profiles.get(asset_id)
            if profile is None:
                if not self._store.exists(asset_id):
                    raise NotFound(f"asset {asset_id} does not exist")
                raise NotFound(f"asset {asset_id} is not profiled yet")
            # where-profile mirrors the policy module at read time.
            profile.where["access_mode"] = self._access_mode_of(asset_id)
            return profile

    def has_profile(self, asset_id: str) -> bool:
        return asset_id in self._profiles

    def profiled_ids(self) -> list[str]:
        with self._lock:
            return list(self._profiles)

    def record_result_access(self, asset_ids: set[str], user: str) -> None:
        with self._lock:
            for aid in asset_ids:
                profile = self._profiles.get(aid)
                if profile and user not in profile.who["users"]:
                    profile.who["users"].append(user)

    def token_set(self, asset_id: str) -> set[str]:
        """Search tokens: column names, why text, non-PII top values."""
        profile = self.get(asset_id)
        tokens: set[str] = set()
        for col in profile.what:
            tokens.update(col.name_tokens)
            for value, _ in col.top_values:
                tokens.update(tokenize(value))
        tokens.update(tokenize(profile.why.get("text", "")))
        return tokens

    # -- query ------------------------------------------------------------------

    def query(self, q: CatalogQuery, user: str) -> list[str]:
        with self._lock:
            candidates = list(self._profiles.items())
        out = []
        for asset_id, profile in candidates:
            if not self._store.exists(asset_id):
                continue
            if not self._visible_to(user, asset_id):
                continue
            if q.creator_in is not None and profile.who["producer"] not in q.creator_in:
                continue
            if q.created_after is not None and profile.when["created_at"] <= q.created_after:
                continue
            if q.requires_why and not profile.why_is_human:
                continue
            if q.max_depth is not None and self._store.provenance_depth(asset_id) > q.max_depth:
                continue
            if q.keyword is not None:
                wanted = set(tokenize(q.keyword))
                if not wanted or not wanted <= self.token_set(asset_id):
                    continue
            out.append(asset_id)
        return sorted(out)

    # -- lifecycle / export -------------------------------------------------------

    def tombstone_all(self, asset_ids: set[str]) -> None:
        with self._lock:
            for aid in asset_ids:
                self._profiles.pop(aid, None)

    def export_records(self) -> str:
        with self._lock:
            rows = [self._profiles[aid].to_record() for aid in sorted(self._profiles)]
        return records.dump_lines(rows)

    def import_records(self, text: str) -> int:
        count = 0
        for record in records.load_lines(text):
            what = [
                ColumnProfile(
                    name=c["name"], dtype=c["dtype"], row_count=c["row_count"],
                    distinct_estimate=c["distinct_estimate"], minimum=c["min"],
                    maximum=c["max"], top_values=[(v, n) for v, n in c["top_values"]],
                    sketch=c["sketch"], name_tokens=c["name_tokens"],
                )
                for c in record["what"]
            ]
            profile = ProfileSet(
                asset_id=record["asset"], what=what, who=record["who"], how=record["how"],
                where=record["where"], when=record["when"], why=record["why"],
                ext=record.get("ext", {}),
            )
            with self._lock:
                self._profiles[record["asset"]] = profile
            count += 1
        return count


def _to_iso(value: str) -> str:
    v = value.strip()
    if "/" in v:
        month, day, year = v.split("/")
        return f"{year}-{int(month):02d}-{int(day):02d}"
    return v
