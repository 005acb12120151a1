"""Task capsules: computation requests written without seeing any data.

A capsule carries a task spec (type + payload), a degree-of-satisfaction
spec deciding when a result is good enough, and trust constraints over the
lineage of whatever data ends up contributing. Test/example data travels
inline; the station never reads user filesystems.

Wire format: one canonical record with fields task_type, payload, dos,
trust. The fingerprint is the SHA-256 of that canonical encoding and
deliberately excludes the submitter, so identical requests from different
users share cache entries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from . import records
from .catalog import Catalog
from .errors import DosMismatch, MalformedDocument, NotFound, PayloadMismatch, UnknownTaskType
from .store import AssetStore
from .tabular import Table, parse_csv

TASK_TYPES = ("search", "qbe", "classify")
DOS_METRIC_FOR = {"search": "hits", "qbe": "coverage", "classify": "accuracy"}


@dataclass(frozen=True)
class DosSpec:
    metric: str
    threshold: float

    def to_record(self) -> dict:
        value = int(self.threshold) if self.metric == "hits" else self.threshold
        return {"metric": self.metric, "threshold": value}


@dataclass(frozen=True)
class TrustConstraints:
    creators_allow: frozenset[str] | None = None
    created_after: float | None = None
    require_why_profile: bool = False
    max_provenance_depth: int | None = None

    @property
    def empty(self) -> bool:
        return (
            self.creators_allow is None
            and self.created_after is None
            and not self.require_why_profile
            and self.max_provenance_depth is None
        )

    def to_record(self) -> dict:
        return {
            "creators_allow": sorted(self.creators_allow) if self.creators_allow is not None else None,
            "created_after": self.created_after,
            "require_why_profile": self.require_why_profile,
            "max_provenance_depth": self.max_provenance_depth,
        }


@dataclass(frozen=True)
class TaskCapsule:
    task_type: str
    payload: dict
    dos: DosSpec
    trust: TrustConstraints
    submitter: str = ""

    def to_record(self) -> dict:
        """Canonical content record; excludes submitter by design."""
        return {
            "task_type": self.task_type,
            "payload": self.payload,
            "dos": self.dos.to_record(),
            "trust": self.trust.to_record(),
        }

    def test_table(self) -> Table:
        if self.task_type != "classify":
            raise PayloadMismatch("only classify capsules carry test data")
        return parse_csv(self.payload["test_data"].encode("utf-8"))


def serialize(capsule: TaskCapsule) -> bytes:
    return (records.dumps(capsule.to_record()) + "\n").encode("utf-8")


def fingerprint(capsule: TaskCapsule) -> str:
    return hashlib.sha256(records.dumps(capsule.to_record()).encode("utf-8")).hexdigest()


def parse(document: bytes | str, submitter: str = "") -> TaskCapsule:
    """Validate a capsule document; collects every violation it can name."""
    try:
        record = records.loads(document)
    except Exception as exc:
        raise MalformedDocument(f"not a valid record: {exc}") from exc
    if not isinstance(record, dict):
        raise MalformedDocument("capsule document must be a single record")
    missing = [k for k in ("task_type", "payload", "dos", "trust") if k not in record]
    if missing:
        raise MalformedDocument(f"missing fields: {', '.join(missing)}")

    task_type = record["task_type"]
    if task_type not in TASK_TYPES:
        raise UnknownTaskType(f"unknown task type {task_type!r}")

    payload = _validate_payload(task_type, record["payload"])
    dos = _validate_dos(task_type, record["dos"])
    trust = _validate_trust(record["trust"])
    return TaskCapsule(task_type=task_type, payload=payload, dos=dos, trust=trust, submitter=submitter)


def _validate_payload(task_type: str, payload) -> dict:
    if not isinstance(payload, dict):
        raise PayloadMismatch("payload must be a record")
    violations: list[str] = []
    clean: dict = {}
    if task_type == "search":
        keywords = payload.get("keywords")
        if not isinstance(keywords, list) or not keywords:
            violations.append("search payload needs a non-empty keywords list")
        else:
            trimmed = [str(k).strip() for k in keywords]
            if any(not k for k in trimmed):
                violations.append("keywords must be non-empty after trimming")
            clean["keywords"] = trimmed
    elif task_type == "qbe":
        attributes = payload.get("attributes")
        rows = payload.get("example_rows")
        if not isinstance(attributes, list) or not attributes:
            violations.append("qbe payload needs a non-empty attributes list")
        else:
            clean["attributes"] = [str(a).strip() for a in attributes]
        if not isinstance(rows, list) or not rows:
            violations.append("qbe payload needs at least one example row")
        elif isinstance(attributes, list):
            for i, row in enumerate(rows):
                if not isinstance(row, list) or len(row) != len(attributes):
                    violations.append(
                        f"example row {i} has {len(row) if isinstance(row, list) else 'no'} "
                        f"values for {len(attributes)} attributes"
                    )
            clean["example_rows"] = [[str(v) for v in row] for row in rows if isinstance(row, list)]
    else:  # classify
        n_classes = payload.get("n_classes")
        label_column = payload.get("label_column")
        test_data = payload.get("test_data")
        model_class = payload.get("model_class")
        if not isinstance(n_classes, int) or n_classes < 2:
            violations.append("n_classes must be an integer >= 2")
        if not isinstance(label_column, str) or not label_column.strip():
            violations.append("label_column must be a non-empty string")
        if not isinstance(model_class, str) or not model_class.strip():
            violations.append("model_class must be a non-empty tag")
        if not isinstance(test_data, str) or not test_data.strip():
            violations.append("test_data must be inline CSV text")
        else:
            try:
                table = parse_csv(test_data.encode("utf-8"))
            except Exception as exc:
                violations.append(f"test_data does not parse: {exc}")
                table = None
            if table is not None and isinstance(label_column, str):
                if len(table.rows) < 2:
                    violations.append("test_data must have at least 2 rows")
                if not table.has_column(label_column):
                    violations.append(f"test_data lacks label column {label_column!r}")
                elif isinstance(n_classes, int):
                    labels = {v for v in table.column_values(label_column)}
                    if len(labels) > n_classes:
                        violations.append(
                            f"test labels take {len(labels)} values, more than n_classes={n_classes}"
                        )
        clean.update(
            n_classes=n_classes, label_column=label_column,
            test_data=test_data, model_class=model_class,
        )
    if violations:
        raise PayloadMismatch("; ".join(violations), violations=violations)
    return clean


def _validate_dos(task_type: str, dos) -> DosSpec:
    if not isinstance(dos, dict) or "metric" not in dos or "threshold" not in dos:
        raise DosMismatch("dos needs metric and threshold fields")
    metric = dos["metric"]
    expected = DOS_METRIC_FOR[task_type]
    if metric != expected:
        raise DosMismatch(f"task type {task_type} uses metric {expected!r}, got {metric!r}")
    threshold = dos["threshold"]
    if metric == "hits":
        if not isinstance(threshold, int) or threshold < 1:
            raise DosMismatch("hits threshold must be an integer >= 1")
        return DosSpec(metric=metric, threshold=float(threshold))
    if not isinstance(threshold, (int, float)) or not 0.0 <= float(threshold) <= 1.0:
        raise DosMismatch(f"{metric} threshold must be a real in [0,1]")
    return DosSpec(metric=metric, threshold=float(threshold))


def _validate_trust(trust) -> TrustConstraints:
    if not isinstance(trust, dict):
        raise MalformedDocument("trust must be a record")
    creators = trust.get("creators_allow")
    depth = trust.get("max_provenance_depth")
    if depth is not None and (not isinstance(depth, int) or depth < 0):
        raise MalformedDocument("max_provenance_depth must be an integer >= 0")
    return TrustConstraints(
        creators_allow=frozenset(creators) if creators is not None else None,
        created_after=trust.get("created_after"),
        require_why_profile=bool(trust.get("require_why_profile", False)),
        max_provenance_depth=depth,
    )


def check_trust(
    constraints: TrustConstraints,
    asset_id: str,
    catalog: Catalog,
    store: AssetStore,
    ignore_why: bool = False,
) -> bool:
    """True iff the constraints hold for the asset and its whole ancestry.

    Creator and why-profile constraints bind on contributed datasets; nodes
    the station itself derived pass those vacuously (their lineage is what
    gets checked). created_after binds on every node.
    """
    if not store.exists(asset_id):
        raise NotFound(f"asset {asset_id} does not exist")
    closure = {asset_id} | store.ancestors(asset_id)
    for node in closure:
        asset = store.get(node)
        profile = catalog.get(node)
        if constraints.created_after is not None:
            if profile.when["created_at"] <= constraints.created_after:
                return False
        if asset.is_original:
            if constraints.creators_allow is not None:
                if profile.who["producer"] not in constraints.creators_allow:
                    return False
            if constraints.require_why_profile and not ignore_why:
                if not profile.why_is_human:
                    return False
    if constraints.max_provenance_depth is not None:
        if store.provenance_depth(asset_id) > constraints.max_provenance_depth:
            return False
    return True


def trust_fails_only_why(
    constraints: TrustConstraints, asset_id: str, catalog: Catalog, store: AssetStore
) -> bool:
    """Asset would pass trust if someone filled in the missing why-profile."""
    if not constraints.require_why_profile:
        return False
    return check_trust(constraints, asset_id, catalog, store, ignore_why=True) and not check_trust(
        constraints, asset_id, catalog, store
    )
