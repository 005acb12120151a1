"""Blend plan synthesis and materialization.

A plan turns one or two discovered assets into the exact table a capsule
asked for: per-column transforms validated against the capsule's own
example/test values, plus an inner join when two inputs are involved.

Matching rule: a capsule value v matches a source column under transform t
when canon_t(v) equals canon_t(s) for some source value s, where canon_t
falls back to the raw input if the transform cannot parse it. A transform
is accepted for a column when at least `match_fraction` of the capsule's
non-empty values match; candidates are tried in the fixed order identity,
trim, lowercase, parse_number, parse_date_iso, parse_date_us and the first
viable one wins.

Join keys are chosen by maximal post-transform value overlap (exact Jaccard
over the transformed distinct sets). When the two best choices land within
`tie_tolerance` of each other the engine refuses to guess and reports a
join ambiguity instead; a recorded human answer resolves the pair
corpus-wide.

Plan summary format (stable, used in how-profiles):
    join(<a>.<col>~<t1>, <b>.<col>~<t2>); map(<tgt><-<asset>.<col>~<t>); ...
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .capsule import TaskCapsule
from .catalog import Catalog
from .config import StationConfig
from .discovery import Candidate, DiscoveryIndex
from .errors import GovernanceViolation, JoinEmpty, NoViablePlan
from .policy import PolicyEngine
from .store import AssetStore, DerivedProduct
from .tabular import Table, is_date, is_number

TRANSFORM_ORDER = ("identity", "trim", "lowercase", "parse_number", "parse_date_iso", "parse_date_us")


def apply_transform(tag: str, value: str) -> str | None:
    """Total on text; None marks unparseable input for the parse_* family."""
    if tag == "identity":
        return value
    if tag == "trim":
        return value.strip()
    if tag == "lowercase":
        return value.lower()
    if tag == "parse_number":
        v = value.strip()
        if not is_number(v):
            return None
        return repr(float(v))
    if tag == "parse_date_iso":
        v = value.strip()
        if not is_date(v) or "/" in v:
            return None
        return v
    if tag == "parse_date_us":
        v = value.strip()
        if not is_date(v) or "/" not in v:
            return None
        month, day, year = v.split("/")
        return f"{year}-{int(month):02d}-{int(day):02d}"
    raise NoViablePlan(f"unknown transform {tag!r}")


def canon(tag: str, value: str) -> str:
    out = apply_transform(tag, value)
    return value if out is None else out


@dataclass(frozen=True)
class ColumnMap:
    target: str
    source_asset: str
    source_column: str
    transform: str


@dataclass(frozen=True)
class JoinSpec:
    left_asset: str
    left_column: str
    left_transform: str
    right_asset: str
    right_column: str
    right_transform: str


@dataclass
class BlendPlan:
    inputs: tuple[str, ...]
    join: JoinSpec | None
    mapping: tuple[ColumnMap, ...]
    validation_score: float

    def columns_read(self) -> Iterable[tuple[str, str]]:
        for m in self.mapping:
            yield (m.source_asset, m.source_column)
        if self.join:
            yield (self.join.left_asset, self.join.left_column)
            yield (self.join.right_asset, self.join.right_column)

    def summary(self) -> str:
        parts = []
        if self.join:
            j = self.join
            parts.append(
                f"join({j.left_asset}.{j.left_column}~{j.left_transform}, "
                f"{j.right_asset}.{j.right_column}~{j.right_transform})"
            )
        for m in self.mapping:
            parts.append(f"map({m.target}<-{m.source_asset}.{m.source_column}~{m.transform})")
        return "; ".join(parts)

    def to_record(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "join": None
            if self.join is None
            else {
                "left_asset": self.join.left_asset,
                "left_column": self.join.left_column,
                "left_transform": self.join.left_transform,
                "right_asset": self.join.right_asset,
                "right_column": self.join.right_column,
                "right_transform": self.join.right_transform,
            },
            "mapping": [
                {
                    "target": m.target,
                    "source_asset": m.source_asset,
                    "source_column": m.source_column,
                    "transform": m.transform,
                }
                for m in self.mapping
            ],
            "validation_score": self.validation_score,
            "summary": self.summary(),
        }


@dataclass
class Ambiguity:
    kind: str  # join_choice | missing_profile
    alternatives: list[dict]
    capsule_fp: str
    context_key: str

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "alternatives": self.alternatives,
            "capsule_fp": self.capsule_fp,
            "context_key": self.context_key,
        }


class Blender:
    def __init__(
        self,
        store: AssetStore,
        catalog: Catalog,
        policy: PolicyEngine,
        discovery: DiscoveryIndex,
        config: StationConfig,
    ):
        self._store = store
        self._catalog = catalog
        self._policy = policy
        self._discovery = discovery
        self._config = config

    # -- synthesis ---------------------------------------------------------------

    def synthesize(self, candidate: Candidate, capsule: TaskCapsule) -> BlendPlan | Ambiguity:
        targets = _capsule_targets(capsule)
        if not targets:
            raise NoViablePlan("capsule names no target columns")
        fp_join = None
        if len(candidate.assets) == 2:
            chosen = self._choose_join(candidate, capsule)
            if isinstance(chosen, Ambiguity):
                return chosen
            fp_join = chosen
        mapping, score = self._choose_mapping(candidate.assets, targets)
        return BlendPlan(
            inputs=tuple(candidate.assets),
            join=fp_join,
            mapping=tuple(mapping),
            validation_score=score,
        )

    def _choose_mapping(
        self, assets: tuple[str, ...], targets: dict[str, list[str]]
    ) -> tuple[list[ColumnMap], float]:
        mapping: list[ColumnMap] = []
        matched_total = 0
        value_total = 0
        for target, examples in targets.items():
            non_empty = [v for v in examples if v.strip()]
            hit = None
            for asset_id in assets:
                table = self._store.read_table(asset_id)
                if not table.has_column(target):
                    continue
                source_column = table.columns[table.column_index(target)]
                source_values = table.column_values(target)
                if not non_empty:
                    hit = (asset_id, source_column, "identity", 0)
                    break
                for tag in TRANSFORM_ORDER:
                    canon_sources = {canon(tag, s) for s in source_values}
                    matched = sum(1 for v in non_empty if canon(tag, v) in canon_sources)
                    if matched / len(non_empty) >= self._config.match_fraction:
                        hit = (asset_id, source_column, tag, matched)
                        break
                if hit:
                    break
            if hit is None:
                raise NoViablePlan(f"no transform maps target column {target!r}")
            asset_id, source_column, tag, matched = hit
            mapping.append(
                ColumnMap(
                    target=target, source_asset=asset_id,
                    source_column=source_column, transform=tag,
                )
            )
            matched_total += matched
            value_total += len(non_empty)
        score = matched_total / value_total if value_total else 1.0
        return mapping, score

    def _choose_join(
        self, candidate: Candidate, capsule: TaskCapsule
    ) -> JoinSpec | Ambiguity:
        a, b = candidate.assets
        annotation = self._discovery.annotation_for(a, b)
        choices = self._join_choices(a, b)
        if not choices:
            raise NoViablePlan(f"no join column pair clears threshold between {a} and {b}")
        if annotation:
            for choice in choices:
                if (choice["left_column"], choice["right_column"]) == annotation:
                    return _join_spec_of(choice)
            raise NoViablePlan(
                f"annotated join {annotation} no longer viable between {a} and {b}"
            )
        top = choices[0]
        near = [
            c
            for c in choices
            if top["overlap"] - c["overlap"] < self._config.tie_tolerance
            and (c["left_column"], c["right_column"]) != (top["left_column"], top["right_column"])
        ]
        if near:
            from .capsule import fingerprint as capsule_fingerprint

            alternatives = [_describe_choice(c) for c in [top] + near]
            pair_key = "|".join(
                f"{c['left_asset']}.{c['left_column']}~{c['right_asset']}.{c['right_column']}"
                for c in [top] + near
            )
            return Ambiguity(
                kind="join_choice",
                alternatives=alternatives,
                capsule_fp=capsule_fingerprint(capsule),
                context_key=f"join:{pair_key}",
            )
        return _join_spec_of(top)

    def _join_choices(self, a: str, b: str) -> list[dict]:
        """All viable (column pair, transform pair) choices, best overlap first."""
        table_a = self._store.read_table(a)
        table_b = self._store.read_table(b)
        choices = []
        for ca in table_a.columns:
            values_a = [v for v in table_a.column_values(ca) if v.strip()]
            if not values_a:
                continue
            for cb in table_b.columns:
                values_b = [v for v in table_b.column_values(cb) if v.strip()]
                if not values_b:
                    continue
                best = None
                for i_l, tl in enumerate(TRANSFORM_ORDER):
                    left = {canon(tl, v) for v in values_a}
                    for i_r, tr in enumerate(TRANSFORM_ORDER):
                        right = {canon(tr, v) for v in values_b}
                        union = left | right
                        overlap = len(left & right) / len(union) if union else 0.0
                        key = (-overlap, i_l + i_r, i_l)
                        if best is None or key < best[0]:
                            best = (key, tl, tr, overlap)
                if best is None or best[3] < self._config.join_threshold:
                    continue
                choices.append(
                    {
                        "left_asset": a, "left_column": ca, "left_transform": best[1],
                        "right_asset": b, "right_column": cb, "right_transform": best[2],
                        "overlap": best[3],
                    }
                )
        choices.sort(key=lambda c: (-c["overlap"], c["left_column"], c["right_column"]))
        return choices

    # -- materialization ------------------------------------------------------------

    def materialize(
        self, plan: BlendPlan, task_type: str = "", model_class: str = ""
    ) -> DerivedProduct:
        violations = self._policy.check_governance(plan, task_type, model_class)
        if violations:
            raise GovernanceViolation(
                "; ".join(f"{v.kind}: {v.detail}" for v in violations), violations=violations
            )
        rows = self._joined_rows(plan)
        out_rows = []
        for per_asset in rows:
            out_rows.append(
                [
                    canon(m.transform, per_asset[m.source_asset][m.source_column])
                    for m in plan.mapping
                ]
            )
        if not out_rows:
            raise JoinEmpty("blend produced zero rows")
        table = Table(columns=[m.target for m in plan.mapping], rows=out_rows)
        product = self._store.register_derived(
            kind="table",
            parents=plan.inputs,
            producing_op=plan.summary(),
            content=table.to_csv_bytes(),
        )
        return product

    def _joined_rows(self, plan: BlendPlan) -> list[dict[str, dict[str, str]]]:
        """Rows as {asset id: {column: value}}; inner join on transformed keys."""

        def row_map(asset_id: str, row: list[str], table: Table) -> dict[str, str]:
            return dict(zip(table.columns, row))

        first = plan.inputs[0]
        table_a = self._store.read_table(first)
        if plan.join is None:
            return [{first: row_map(first, row, table_a)} for row in table_a.rows]
        j = plan.join
        table_l = self._store.read_table(j.left_asset)
        table_r = self._store.read_table(j.right_asset)
        li = table_l.column_index(j.left_column)
        ri = table_r.column_index(j.right_column)
        out = []
        for lrow in table_l.rows:
            lkey = canon(j.left_transform, lrow[li])
            if not lkey.strip():
                continue
            for rrow in table_r.rows:
                rkey = canon(j.right_transform, rrow[ri])
                if not rkey.strip():
                    continue
                if lkey == rkey:
                    out.append(
                        {
                            j.left_asset: row_map(j.left_asset, lrow, table_l),
                            j.right_asset: row_map(j.right_asset, rrow, table_r),
                        }
                    )
        return out


def _capsule_targets(capsule: TaskCapsule) -> dict[str, list[str]]:
    """Target columns and the capsule's own values for each, in order."""
    if capsule.task_type == "qbe":
        attrs = capsule.payload["attributes"]
        rows = capsule.payload["example_rows"]
        return {attr: [row[i] for row in rows] for i, attr in enumerate(attrs)}
    if capsule.task_type == "classify":
        table = capsule.test_table()
        return {col: table.column_values(col) for col in table.columns}
    return {}


def _join_spec_of(choice: dict) -> JoinSpec:
    return JoinSpec(
        left_asset=choice["left_asset"],
        left_column=choice["left_column"],
        left_transform=choice["left_transform"],
        right_asset=choice["right_asset"],
        right_column=choice["right_column"],
        right_transform=choice["right_transform"],
    )


def _describe_choice(choice: dict) -> dict:
    return {
        "description": (
            f"join {choice['left_asset']} column '{choice['left_column']}' with "
            f"{choice['right_asset']} column '{choice['right_column']}' "
            f"(overlap {choice['overlap']:.3f})"
        ),
        "left_asset": choice["left_asset"],
        "left_column": choice["left_column"],
        "left_transform": choice["left_transform"],
        "right_asset": choice["right_asset"],
        "right_column": choice["right_column"],
        "right_transform": choice["right_transform"],
        "score": choice["overlap"],
    }
