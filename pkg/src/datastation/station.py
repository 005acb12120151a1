"""The station facade: one object wiring store, catalog, policy, discovery,
blending, execution, and the human-task market behind a narrow surface.

Ingest triggers profiling and indexing; deletion cascades fan out to token
revocation, catalog tombstones, index removal, and cache purges through
store hooks; market answers feed back into the linkage graph or the
catalog and flag blocked capsules resumable.

With `rng_seed` set in the config the station runs fully deterministic:
ids come from a seeded generator and the clock is logical, so two runs of
the same scenario produce byte-identical audit logs.
"""

from __future__ import annotations

import random
import secrets
import threading
import time
import zipfile
import io
from dataclasses import dataclass, field, replace

from . import capsule as capsule_mod
from .blending import Blender
from .catalog import Catalog, CatalogQuery
from .config import StationConfig, UserIdentity
from .discovery import DiscoveryIndex
from .errors import AccessDenied, InsufficientEscrowFunds, MalformedCsv, NotFound, NotOwner
from .executor import ExecutionBudget, Executor, Outcome
from .market import Ledger, Market
from .policy import AccessPolicy, GovernancePolicy, PolicyEngine
from .store import AssetStore, Dataset, ProfileSeed


class _IdGen:
    def __init__(self, seed: int | None):
        self._rng = random.Random(seed) if seed is not None else None
        self._lock = threading.Lock()

    def __call__(self) -> str:
        with self._lock:
            if self._rng is None:
                return secrets.token_hex(16)
            return f"{self._rng.getrandbits(128):032x}"


class _LogicalClock:
    """Monotone fake clock for reproducible runs; one tick per reading."""

    def __init__(self, start: float = 1_700_000_000.0):
        self._now = start
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            self._now += 1.0
            return self._now


@dataclass
class CapsuleStatus:
    fingerprint: str
    submitter: str
    status: str = "running"
    task_ids: list[str] = field(default_factory=list)
    result_id: str = ""
    best_dos: float = 0.0

    def to_record(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "submitter": self.submitter,
            "status": self.status,
            "task_ids": self.task_ids,
            "result_id": self.result_id,
            "best_dos": self.best_dos,
        }


class Station:
    def __init__(self, config: StationConfig):
        self.config = config
        config.store_root.mkdir(parents=True, exist_ok=True)
        self.idgen = _IdGen(config.rng_seed)
        self.clock = _LogicalClock() if config.rng_seed is not None else time.time
        dp_rng = random.Random(config.dp_seed) if config.dp_seed is not None else None

        self.store = AssetStore(config.store_root, self.idgen, self.clock)
        self.policy = PolicyEngine(
            secret=config.station_secret(),
            idgen=self.idgen,
            clock=self.clock,
            owner_of=self._owner_of,
            dp_rng=dp_rng,
        )
        self.policy.set_governance(GovernancePolicy(pii_dictionary=config.pii_names()))
        self.catalog = Catalog(
            store=self.store,
            pii_names=lambda: self.policy.governance.pii_dictionary,
            access_mode_of=self.policy.access_mode_of,
            visible_to=lambda user, aid: self.discovery.visible_to(user, aid),
        )
        self.discovery = DiscoveryIndex(
            store=self.store,
            catalog=self.catalog,
            policy=self.policy,
            config=config,
            key_of=self.key_of,
        )
        self.blender = Blender(self.store, self.catalog, self.policy, self.discovery, config)
        self.executor = Executor(
            store=self.store,
            catalog=self.catalog,
            policy=self.policy,
            discovery=self.discovery,
            blender=self.blender,
            config=config,
            idgen=self.idgen,
            clock=self.clock,
            audit_path=config.store_root / "audit.log",
            key_of=self.key_of,
            on_materialized=lambda aid: self.catalog.profile(aid),
        )
        self.ledger = Ledger()
        self.market = Market(
            ledger=self.ledger,
            idgen=self.idgen,
            clock=self.clock,
            prices={
                "join_disambiguation": config.price_disambiguation,
                "why_profile_request": config.price_why_profile,
            },
            claim_ttl=config.claim_ttl_seconds,
        )

        # Cross-module wiring.
        self.store.on_delete(self.policy.revoke_assets)
        self.catalog.on_why_set(self.market.notify_why_filled)
        self.market.on_join_answer = self._apply_join_answer
        self.market.on_why_answer = lambda asset, text, author: self.catalog.upsert_why(
            asset, text, author
        )
        self.executor.generate_tasks = self._generate_tasks

        self._capsules: dict[str, CapsuleStatus] = {}
        self._capsule_docs: dict[str, capsule_mod.TaskCapsule] = {}
        self._lock = threading.RLock()

    # -- identity helpers ------------------------------------------------------------

    def key_of(self, user: str) -> str:
        ident = self.config.users.get(user)
        return ident.key_fingerprint if ident else ""

    def identity_for_secret(self, secret: str) -> UserIdentity | None:
        if not secret:
            return None
        for ident in self.config.users.values():
            if ident.secret and ident.secret == secret:
                return ident
        return None

    def add_user(self, ident: UserIdentity) -> None:
        self.config.users[ident.user_id] = ident

    def _owner_of(self, asset_id: str) -> str:
        try:
            asset = self.store.get(asset_id)
        except NotFound:
            return ""
        return asset.owner_key if isinstance(asset, Dataset) else ""

    # -- contribution ------------------------------------------------------------------

    def ingest_dataset(
        self,
        content: bytes,
        owner_key: str,
        signature: str,
        default_policy: AccessPolicy,
        encrypted: bool = False,
        metadata: ProfileSeed | None = None,
    ) -> str:
        dataset = self.store.ingest(content, owner_key, signature, encrypted, metadata)
        self.policy.register(replace(default_policy, dataset=dataset.id))
        self.catalog.profile(dataset.id, seed=metadata)
        self.discovery.index(dataset.id)
        return dataset.id

    def bulk_ingest(
        self, archive: bytes, owner_key: str, default_policy: AccessPolicy
    ) -> list[str]:
        """Zip archive of `<name>.csv` plus `<name>.sig` (hex) pairs."""
        try:
            zf = zipfile.ZipFile(io.BytesIO(archive))
        except zipfile.BadZipFile as exc:
            raise MalformedCsv(f"bulk upload is not a zip archive: {exc}") from exc
        names = sorted(n for n in zf.namelist() if n.endswith(".csv"))
        if not names:
            raise MalformedCsv("bulk archive holds no .csv members")
        ids = []
        for name in names:
            sig_name = name[: -len(".csv")] + ".sig"
            if sig_name not in zf.namelist():
                raise MalformedCsv(f"bulk archive lacks signature file {sig_name}")
            content = zf.read(name)
            signature = zf.read(sig_name).decode("ascii").strip()
            ids.append(self.ingest_dataset(content, owner_key, signature, default_policy))
        return ids

    def update_dataset(self, asset_id: str, content: bytes, owner_key: str, signature: str) -> int:
        version = self.store.update(asset_id, content, owner_key, signature)
        self.catalog.profile(asset_id)
        self.discovery.index(asset_id)
        return version

    def delete_dataset(self, asset_id: str, requester_key: str) -> set[str]:
        asset = self.store.get(asset_id)
        if isinstance(asset, Dataset) and asset.owner_key != requester_key:
            raise NotOwner("only the owning key may invoke deletion")
        if not isinstance(asset, Dataset):
            owners = {self.store.get(o).owner_key for o in self.store.originals_of(asset_id)}
            if requester_key not in owners:
                raise NotOwner("only an owner of a contributing dataset may delete a product")
        return self.store.cascade_delete(asset_id)

    # -- capsules -----------------------------------------------------------------------

    def submit_capsule(self, document: bytes | str, user: str) -> CapsuleStatus:
        parsed = capsule_mod.parse(document, submitter=user)
        fp = capsule_mod.fingerprint(parsed)
        with self._lock:
            self._capsule_docs[fp] = parsed
            status = self._capsules.get(fp)
            if status is None or status.submitter != user:
                status = CapsuleStatus(fingerprint=fp, submitter=user)
                self._capsules[fp] = status
        return self._run_capsule(parsed, status)

    def _run_capsule(self, parsed: capsule_mod.TaskCapsule, status: CapsuleStatus) -> CapsuleStatus:
        try:
            outcome = self.executor.execute(parsed, status.submitter)
        except InsufficientEscrowFunds:
            with self._lock:
                status.status = "unsatisfied"
            raise
        with self._lock:
            status.status = outcome.status
            status.task_ids = list(outcome.task_ids)
            status.best_dos = outcome.best_dos
            status.result_id = outcome.result.id if outcome.result else ""
        return status

    def capsule_status(self, fingerprint: str, refresh: bool = True) -> CapsuleStatus:
        with self._lock:
            status = self._capsules.get(fingerprint)
            parsed = self._capsule_docs.get(fingerprint)
        if status is None or parsed is None:
            raise NotFound(f"capsule {fingerprint} was never submitted")
        if refresh and status.status == "blocked" and self.market.consume_resumable(fingerprint):
            return self._run_capsule(
                replace(parsed, submitter=status.submitter), status
            )
        return status

    def execute_budgeted(self, document: bytes | str, user: str, budget: ExecutionBudget) -> Outcome:
        parsed = capsule_mod.parse(document, submitter=user)
        return self.executor.execute(parsed, user, budget)

    def _generate_tasks(self, parsed: capsule_mod.TaskCapsule, ambiguities) -> list[str]:
        ids = []
        for ambiguity in ambiguities:
            task = self.market.generate(ambiguity, requester=parsed.submitter)
            ids.append(task.id)
        return ids

    def _apply_join_answer(self, alternative: dict) -> None:
        self.discovery.annotate_join(
            alternative["left_asset"],
            alternative["left_column"],
            alternative["right_asset"],
            alternative["right_column"],
        )

    # -- results --------------------------------------------------------------------------

    def release_result(self, result_id: str, user: str, token: str | None = None) -> dict:
        try:
            return self.executor.release(result_id, user, token)
        except AccessDenied as exc:
            if exc.detail.startswith("NeedsToken"):
                result = self.executor.result_of(result_id)
                user_key = self.key_of(user)
                pending = []
                for dataset in sorted(result.contributing):
                    policy = self.policy.get(dataset)
                    if policy.access == "brokered" and not self.policy.is_owner(user_key, dataset):
                        access = self.policy.evaluate_access(
                            user, dataset, result.task_type,
                            capsule_fp=result.capsule_fp, user_key=user_key,
                        )
                        if access.verdict == "needs_approval":
                            pending.append(access.request_id)
                exc.pending_requests = pending
            raise

    # -- catalog / market passthroughs ------------------------------------------------------

    def catalog_search(self, user: str, query: CatalogQuery) -> list[str]:
        return self.catalog.query(query, user)

    def fund_account(self, user: str, amount: int) -> None:
        self.ledger.mint(user, amount)

    def audit_lines(self) -> list[str]:
        return self.executor.audit_lines()
