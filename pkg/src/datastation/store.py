"""Sealed asset store: contributed datasets, derived products, provenance.

Nothing in here hands row content to callers outside the engine; executors
and the profiler read tables in-process via `read_table`. The provenance
graph (edges child -> parent) stays acyclic by construction and backs both
trust checks and right-to-be-forgotten cascades.

On-disk layout, one directory per asset:

    <root>/assets/<id>/<version>.csv   (or .bin for opaque content)
    <root>/assets/<id>/meta            (canonical record of the fields below)
    <root>/tombstones/<id>             (id, deletion time, reason; no content)
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from . import keys, records
from .errors import (
    CycleDetected,
    EncryptedWithoutMetadata,
    MalformedCsv,
    NotFound,
    NotOwner,
    SignatureInvalid,
    UnknownParent,
)
from .tabular import ColumnSpec, Table, infer_schema, parse_csv

DERIVED_KINDS = ("table", "model", "report")


@dataclass
class ProfileSeed:
    """Contributor-supplied metadata; mandatory for encrypted uploads."""

    schema: list[ColumnSpec] | None = None
    why_text: str = ""
    why_author: str = ""


@dataclass
class VersionInfo:
    version: int
    content_ref: str
    signature: str
    digest: str


@dataclass
class Dataset:
    id: str
    owner_key: str
    signature: str
    schema: list[ColumnSpec]
    version: int
    content_ref: str
    sealed: bool = True
    encrypted: bool = False
    created_at: float = 0.0
    modified_at: float = 0.0
    versions: list[VersionInfo] = field(default_factory=list)

    kind = "dataset"

    @property
    def is_original(self) -> bool:
        return True


@dataclass
class DerivedProduct:
    id: str
    kind: str
    parents: tuple[str, ...]
    producing_op: str
    content_ref: str
    sealed: bool = True
    created_at: float = 0.0
    modified_at: float = 0.0

    @property
    def is_original(self) -> bool:
        return False

    @property
    def schema(self) -> list[ColumnSpec]:
        return []


@dataclass(frozen=True)
class Tombstone:
    id: str
    deleted_at: float
    reason: str


class AssetStore:
    def __init__(self, root: Path, idgen: Callable[[], str], clock: Callable[[], float]):
        self.root = Path(root)
        (self.root / "assets").mkdir(parents=True, exist_ok=True)
        (self.root / "tombstones").mkdir(parents=True, exist_ok=True)
        self._idgen = idgen
        self._clock = clock
        self._assets: dict[str, Dataset | DerivedProduct] = {}
        self._parents: dict[str, tuple[str, ...]] = {}
        self._children: dict[str, set[str]] = {}
        self._tombstones: dict[str, Tombstone] = {}
        self._graph_lock = threading.RLock()
        self._asset_locks: dict[str, threading.Lock] = {}
        self._tables: dict[tuple[str, int], Table] = {}
        self._on_delete: list[Callable[[set[str]], None]] = []

    # -- wiring -------------------------------------------------------------

    def on_delete(self, hook: Callable[[set[str]], None]) -> None:
        """Register a hook fired with the set of ids removed by a cascade."""
        self._on_delete.append(hook)

    def _lock_for(self, asset_id: str) -> threading.Lock:
        with self._graph_lock:
            return self._asset_locks.setdefault(asset_id, threading.Lock())

    # -- lookups ------------------------------------------------------------

    def get(self, asset_id: str) -> Dataset | DerivedProduct:
        asset = self._assets.get(asset_id)
        if asset is None:
            raise NotFound(f"asset {asset_id} does not exist")
        return asset

    def exists(self, asset_id: str) -> bool:
        return asset_id in self._assets

    def asset_ids(self) -> list[str]:
        return list(self._assets)

    def datasets(self) -> list[Dataset]:
        return [a for a in self._assets.values() if isinstance(a, Dataset)]

    def parents_of(self, asset_id: str) -> tuple[str, ...]:
        return self._parents.get(asset_id, ())

    def tombstone_of(self, asset_id: str) -> Tombstone | None:
        return self._tombstones.get(asset_id)

    # -- ingest / update ----------------------------------------------------

    def ingest(
        self,
        content: bytes,
        owner_key: str,
        signature: str,
        encrypted: bool = False,
        metadata: ProfileSeed | None = None,
    ) -> Dataset:
        if not keys.verify_content(owner_key, signature, content):
            raise SignatureInvalid("signature does not verify over content digest")
        if encrypted:
            if metadata is None or not metadata.schema:
                raise EncryptedWithoutMetadata("encrypted uploads must supply a schema")
            schema = list(metadata.schema)
        else:
            table = parse_csv(content)
            schema = infer_schema(table)
        asset_id = self._idgen()
        now = self._clock()
        suffix = "bin" if encrypted else "csv"
        content_ref = f"assets/{asset_id}/1.{suffix}"
        digest = keys.content_digest(content).hex()
        dataset = Dataset(
            id=asset_id,
            owner_key=owner_key,
            signature=signature,
            schema=schema,
            version=1,
            content_ref=content_ref,
            sealed=True,
            encrypted=encrypted,
            created_at=now,
            modified_at=now,
            versions=[VersionInfo(1, content_ref, signature, digest)],
        )
        with self._lock_for(asset_id):
            self._write_content(content_ref, content)
            with self._graph_lock:
                self._assets[asset_id] = dataset
                self._parents[asset_id] = ()
            self._write_meta(dataset)
        return dataset

    def update(self, asset_id: str, content: bytes, owner_key: str, signature: str) -> int:
        asset = self.get(asset_id)
        if not isinstance(asset, Dataset):
            raise NotFound(f"asset {asset_id} is not an updatable dataset")
        if asset.owner_key != owner_key:
            raise NotOwner("only the owning key may update a dataset")
        if not keys.verify_content(owner_key, signature, content):
            raise SignatureInvalid("signature does not verify over content digest")
        if asset.encrypted:
            new_schema = asset.schema
        else:
            new_schema = infer_schema(parse_csv(content))
        with self._lock_for(asset_id):
            version = asset.version + 1
            suffix = "bin" if asset.encrypted else "csv"
            content_ref = f"assets/{asset_id}/{version}.{suffix}"
            self._write_content(content_ref, content)
            asset.schema = new_schema
            asset.version = version
            asset.content_ref = content_ref
            asset.signature = signature
            asset.modified_at = self._clock()
            asset.versions.append(
                VersionInfo(version, content_ref, signature, keys.content_digest(content).hex())
            )
            self._write_meta(asset)
        return version

    # -- derivations ----------------------------------------------------------

    def register_derived(
        self,
        kind: str,
        parents: Iterable[str],
        producing_op: str,
        content: bytes,
        product_id: str | None = None,
    ) -> DerivedProduct:
        if kind not in DERIVED_KINDS:
            raise MalformedCsv(f"unknown derived kind {kind!r}")
        parent_ids = tuple(parents)
        if not parent_ids:
            raise UnknownParent("derived products need at least one parent")
        with self._graph_lock:
            asset_id = product_id or self._idgen()
            if asset_id in self._assets:
                raise CycleDetected(f"asset id {asset_id} already exists")
            if asset_id in self._tombstones:
                raise CycleDetected(f"asset id {asset_id} was deleted and is never reused")
            for pid in parent_ids:
                if pid == asset_id:
                    raise CycleDetected("a product cannot be its own parent")
                if pid not in self._assets:
                    raise UnknownParent(f"parent {pid} does not exist")
                # Child is new, so a cycle can only appear via a path from a
                # parent back to the child; check before committing edges.
                if asset_id in self._ancestor_closure(pid):
                    raise CycleDetected(f"edge {asset_id}->{pid} would close a cycle")
            suffix = {"table": "csv", "model": "model", "report": "txt"}[kind]
            content_ref = f"assets/{asset_id}/1.{suffix}"
            now = self._clock()
            product = DerivedProduct(
                id=asset_id,
                kind=kind,
                parents=parent_ids,
                producing_op=producing_op,
                content_ref=content_ref,
                created_at=now,
                modified_at=now,
            )
            self._write_content(content_ref, content)
            self._assets[asset_id] = product
            self._parents[asset_id] = parent_ids
            for pid in parent_ids:
                self._children.setdefault(pid, set()).add(asset_id)
            self._write_meta(product)
        return product

    # -- provenance ----------------------------------------------------------

    def descendants(self, asset_id: str) -> set[str]:
        self.get(asset_id)
        with self._graph_lock:
            seen: set[str] = set()
            frontier = [asset_id]
            while frontier:
                node = frontier.pop()
                for child in self._children.get(node, ()):
                    if child not in seen:
                        seen.add(child)
                        frontier.append(child)
            return seen

    def ancestors(self, asset_id: str) -> set[str]:
        self.get(asset_id)
        with self._graph_lock:
            return self._ancestor_closure(asset_id)

    def _ancestor_closure(self, asset_id: str) -> set[str]:
        seen: set[str] = set()
        frontier = [asset_id]
        while frontier:
            node = frontier.pop()
            for parent in self._parents.get(node, ()):
                if parent not in seen:
                    seen.add(parent)
                    frontier.append(parent)
        return seen

    def originals_of(self, asset_id: str) -> set[str]:
        """Original datasets in the ancestry (the asset itself if original)."""
        asset = self.get(asset_id)
        if asset.is_original:
            return {asset_id}
        return {aid for aid in self.ancestors(asset_id) if self.get(aid).is_original}

    def provenance_depth(self, asset_id: str) -> int:
        """Longest path from the asset down to any original dataset."""
        asset = self.get(asset_id)
        if asset.is_original:
            return 0
        return 1 + max(self.provenance_depth(pid) for pid in self._parents[asset_id])

    # -- right to be forgotten -------------------------------------------------

    def cascade_delete(self, asset_id: str, reason: str = "rtbf") -> set[str]:
        with self._graph_lock:
            doomed = self.descendants(asset_id) | {asset_id}
            now = self._clock()
            for aid in doomed:
                self._assets.pop(aid, None)
                self._parents.pop(aid, None)
                self._children.pop(aid, None)
                self._tables = {k: v for k, v in self._tables.items() if k[0] != aid}
                self._remove_files(aid)
                tomb = Tombstone(id=aid, deleted_at=now, reason=reason)
                self._tombstones[aid] = tomb
                (self.root / "tombstones" / aid).write_text(
                    records.dumps({"id": aid, "deleted_at": now, "reason": reason}) + "\n"
                )
            for children in self._children.values():
                children -= doomed
        for hook in self._on_delete:
            hook(set(doomed))
        return doomed

    # -- in-process content access ----------------------------------------------

    def read_table(self, asset_id: str) -> Table:
        """Row access for the engine only; never exposed through the API."""
        asset = self.get(asset_id)
        if isinstance(asset, Dataset):
            if asset.encrypted:
                raise MalformedCsv(f"asset {asset_id} is an opaque encrypted blob")
            key = (asset_id, asset.version)
        else:
            if asset.kind != "table":
                raise MalformedCsv(f"asset {asset_id} has kind {asset.kind}, not table")
            key = (asset_id, 1)
        if key not in self._tables:
            self._tables[key] = parse_csv(self.read_content(asset_id))
        return self._tables[key]

    def read_content(self, asset_id: str) -> bytes:
        asset = self.get(asset_id)
        return (self.root / asset.content_ref).read_bytes()

    def verify_signatures(self) -> bool:
        """True iff every stored dataset version verifies against its owner key."""
        for ds in self.datasets():
            for info in ds.versions:
                content = (self.root / info.content_ref).read_bytes()
                if keys.content_digest(content).hex() != info.digest:
                    return False
                if not keys.verify_content(ds.owner_key, info.signature, content):
                    return False
        return True

    # -- files -------------------------------------------------------------------

    def _write_content(self, content_ref: str, content: bytes) -> None:
        path = self.root / content_ref
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)

    def _write_meta(self, asset: Dataset | DerivedProduct) -> None:
        path = self.root / "assets" / asset.id / "meta"
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(asset, Dataset):
            record = {
                "id": asset.id,
                "kind": "dataset",
                "owner_key": asset.owner_key,
                "signature": asset.signature,
                "schema": [{"name": c.name, "dtype": c.dtype} for c in asset.schema],
                "version": asset.version,
                "content_ref": asset.content_ref,
                "sealed": asset.sealed,
                "encrypted": asset.encrypted,
                "created_at": asset.created_at,
                "modified_at": asset.modified_at,
                "versions": [
                    {
                        "version": v.version,
                        "content_ref": v.content_ref,
                        "signature": v.signature,
                        "digest": v.digest,
                    }
                    for v in asset.versions
                ],
            }
        else:
            record = {
                "id": asset.id,
                "kind": asset.kind,
                "parents": list(asset.parents),
                "producing_op": asset.producing_op,
                "content_ref": asset.content_ref,
                "sealed": asset.sealed,
                "created_at": asset.created_at,
                "modified_at": asset.modified_at,
            }
        path.write_text(records.dumps(record) + "\n")

    def _remove_files(self, asset_id: str) -> None:
        asset_dir = self.root / "assets" / asset_id
        if asset_dir.exists():
            for child in sorted(asset_dir.iterdir()):
                child.unlink()
            asset_dir.rmdir()
