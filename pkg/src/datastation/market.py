"""Human-task market: blocked computations buy human answers.

When execution blocks, a priced, human-readable task is posted; the
requester's funds move into escrow and pay out to whoever answers. Prices
are posted per task kind (no auctions). Currency is an abstract integer
unit minted only at account funding, so the total across all balances is
conserved by every other operation.

Task description templates (stable, asserted by golden tests):

    join ambiguity:
        Choose the join for <capsule fp>.
        Alternatives:
          [0] <description>
          [1] <description>
    missing why-profile:
        Explain the purpose of dataset <id> (why-profile). A blocked
        computation depends on it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

from .blending import Ambiguity
from .errors import (
    AlreadyClaimed,
    InsufficientEscrowFunds,
    InvalidAlternative,
    NotClaimant,
    NotFound,
    SelfClaim,
    StationError,
    TaskNotClaimed,
)

TASK_KIND_FOR = {"join_choice": "join_disambiguation", "missing_profile": "why_profile_request"}


@dataclass
class LedgerAccount:
    user_id: str
    balance: int = 0  # total units held, including escrowed
    escrowed: int = 0

    @property
    def available(self) -> int:
        return self.balance - self.escrowed

    def to_record(self) -> dict:
        return {
            "user": self.user_id,
            "balance": self.balance,
            "escrowed": self.escrowed,
            "available": self.available,
        }


class Ledger:
    def __init__(self):
        self._accounts: dict[str, LedgerAccount] = {}
        self._lock = threading.RLock()

    def account(self, user: str) -> LedgerAccount:
        with self._lock:
            return self._accounts.setdefault(user, LedgerAccount(user))

    def mint(self, user: str, amount: int) -> None:
        if amount < 0:
            raise StationError("cannot mint a negative amount")
        with self._lock:
            self.account(user).balance += amount

    def hold(self, user: str, amount: int) -> None:
        with self._lock:
            acct = self.account(user)
            if acct.available < amount:
                raise InsufficientEscrowFunds(
                    f"{user} has {acct.available} available, task costs {amount}"
                )
            acct.escrowed += amount

    def release_hold(self, user: str, amount: int) -> None:
        with self._lock:
            acct = self.account(user)
            acct.escrowed = max(0, acct.escrowed - amount)

    def settle(self, payer: str, payee: str, amount: int) -> None:
        """Move escrowed funds from payer to payee atomically."""
        with self._lock:
            src = self.account(payer)
            dst = self.account(payee)
            if src.escrowed < amount or src.balance < amount:
                raise InsufficientEscrowFunds(f"{payer} escrow does not cover {amount}")
            src.escrowed -= amount
            src.balance -= amount
            dst.balance += amount

    def total(self) -> int:
        with self._lock:
            return sum(a.balance for a in self._accounts.values())

    def snapshot(self) -> dict[str, tuple[int, int]]:
        with self._lock:
            return {u: (a.balance, a.escrowed) for u, a in self._accounts.items()}


@dataclass
class HumanTask:
    id: str
    kind: str  # join_disambiguation | why_profile_request
    description: str
    price: int
    requester: str
    context: dict
    blocking_fingerprints: set[str] = field(default_factory=set)
    status: str = "open"  # open | claimed | answered | expired
    claimant: str = ""
    claimed_at: float = 0.0
    satisfiable: bool = False

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "description": self.description,
            "price": self.price,
            "requester": self.requester,
            "status": self.status,
            "claimant": self.claimant,
            "blocking_fingerprints": sorted(self.blocking_fingerprints),
            "alternatives": self.context.get("alternatives", []),
            "satisfiable": self.satisfiable,
        }


@dataclass
class Answer:
    task_id: str
    respondent: str
    content: str
    timestamp: float

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "respondent": self.respondent,
            "content": self.content,
            "timestamp": self.timestamp,
        }


class Market:
    def __init__(
        self,
        ledger: Ledger,
        idgen: Callable[[], str],
        clock: Callable[[], float],
        prices: dict[str, int],
        claim_ttl: float,
    ):
        self.ledger = ledger
        self._idgen = idgen
        self._clock = clock
        self._prices = dict(prices)
        self._claim_ttl = claim_ttl
        self._tasks: dict[str, HumanTask] = {}
        self._answers: dict[str, Answer] = {}
        self._resumable: set[str] = set()
        self._lock = threading.RLock()
        # Wired by the station: apply a join answer / a why answer.
        self.on_join_answer: Callable[[dict], None] = lambda _alt: None
        self.on_why_answer: Callable[[str, str, str], None] = lambda _a, _t, _u: None

    def price_of(self, kind: str) -> int:
        return self._prices[kind]

    # -- task generation ------------------------------------------------------------

    def generate(self, ambiguity: Ambiguity, requester: str) -> HumanTask:
        kind = TASK_KIND_FOR[ambiguity.kind]
        price = self._prices[kind]
        with self._lock:
            for task in self._tasks.values():
                if (
                    task.status in ("open", "claimed")
                    and task.requester == requester
                    and task.context.get("context_key") == ambiguity.context_key
                ):
                    task.blocking_fingerprints.add(ambiguity.capsule_fp)
                    return task
            self.ledger.hold(requester, price)
            task = HumanTask(
                id=self._idgen(),
                kind=kind,
                description=self._describe(kind, ambiguity),
                price=price,
                requester=requester,
                context={
                    "context_key": ambiguity.context_key,
                    "alternatives": ambiguity.alternatives,
                },
                blocking_fingerprints={ambiguity.capsule_fp},
            )
            self._tasks[task.id] = task
            return task

    def _describe(self, kind: str, ambiguity: Ambiguity) -> str:
        if kind == "join_disambiguation":
            lines = [f"Choose the join for {ambiguity.capsule_fp}.", "Alternatives:"]
            for i, alt in enumerate(ambiguity.alternatives):
                lines.append(f"  [{i}] {alt['description']}")
            return "\n".join(lines)
        asset = ambiguity.alternatives[0]["asset"]
        return (
            f"Explain the purpose of dataset {asset} (why-profile). "
            "A blocked computation depends on it."
        )

    # -- claims -----------------------------------------------------------------------

    def task_of(self, task_id: str) -> HumanTask:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise NotFound(f"task {task_id} does not exist")
            self._expire_stale_claim(task)
            return task

    def _expire_stale_claim(self, task: HumanTask) -> None:
        if task.status == "claimed" and self._clock() - task.claimed_at > self._claim_ttl:
            task.status = "open"
            task.claimant = ""
            task.claimed_at = 0.0

    def open_tasks(self, viewer: str = "") -> list[HumanTask]:
        """Open tasks claimable by `viewer` (a requester never sees their own)."""
        with self._lock:
            out = []
            for task in self._tasks.values():
                self._expire_stale_claim(task)
                if task.status != "open":
                    continue
                if viewer and task.requester == viewer:
                    continue
                out.append(task)
            return sorted(out, key=lambda t: t.id)

    def tasks_requested_by(self, requester: str) -> list[HumanTask]:
        with self._lock:
            return sorted(
                (t for t in self._tasks.values() if t.requester == requester),
                key=lambda t: t.id,
            )

    def claim(self, task_id: str, user: str) -> HumanTask:
        with self._lock:
            task = self.task_of(task_id)
            if user == task.requester:
                raise SelfClaim("requesters may not claim their own tasks")
            if task.status == "claimed":
                raise AlreadyClaimed(f"task {task_id} is claimed by {task.claimant}")
            if task.status != "open":
                raise AlreadyClaimed(f"task {task_id} is {task.status}")
            task.status = "claimed"
            task.claimant = user
            task.claimed_at = self._clock()
            return task

    # -- answers ----------------------------------------------------------------------

    def submit_answer(self, task_id: str, respondent: str, content: str) -> Answer:
        with self._lock:
            task = self.task_of(task_id)
            if task.status == "open":
                raise TaskNotClaimed(f"task {task_id} must be claimed before answering")
            if task.status != "claimed":
                raise TaskNotClaimed(f"task {task_id} is {task.status}")
            if task.claimant != respondent:
                raise NotClaimant(f"task {task_id} is claimed by {task.claimant}")
            if task.kind == "join_disambiguation":
                alternatives = task.context["alternatives"]
                try:
                    index = int(content)
                except (TypeError, ValueError):
                    raise InvalidAlternative(f"answer must be an alternative index, got {content!r}")
                if not 0 <= index < len(alternatives):
                    raise InvalidAlternative(
                        f"index {index} out of range for {len(alternatives)} alternatives"
                    )
            elif not content.strip():
                raise InvalidAlternative("why-profile answers need non-empty text")

            answer = Answer(
                task_id=task_id,
                respondent=respondent,
                content=content,
                timestamp=self._clock(),
            )
            self.ledger.settle(task.requester, respondent, task.price)
            task.status = "answered"
            self._answers[task_id] = answer
            self._resumable |= task.blocking_fingerprints

        if task.kind == "join_disambiguation":
            self.on_join_answer(task.context["alternatives"][int(content)])
        else:
            asset = task.context["alternatives"][0]["asset"]
            self.on_why_answer(asset, content, respondent)
        return answer

    def expire_task(self, task_id: str) -> HumanTask:
        """Retire an open/claimed task and refund its escrow."""
        with self._lock:
            task = self.task_of(task_id)
            if task.status not in ("open", "claimed"):
                raise AlreadyClaimed(f"task {task_id} is {task.status}, cannot expire")
            task.status = "expired"
            task.claimant = ""
            self.ledger.release_hold(task.requester, task.price)
            return task

    # -- unblocking -----------------------------------------------------------------------

    def notify_why_filled(self, asset_id: str) -> None:
        """Catalog hook: a why-profile arrived outside the market flow."""
        with self._lock:
            for task in self._tasks.values():
                if (
                    task.kind == "why_profile_request"
                    and task.status in ("open", "claimed")
                    and task.context.get("context_key") == f"why:{asset_id}"
                ):
                    task.satisfiable = True
                    self._resumable |= task.blocking_fingerprints

    def resumable_fingerprints(self) -> set[str]:
        with self._lock:
            return set(self._resumable)

    def consume_resumable(self, fingerprint: str) -> bool:
        with self._lock:
            if fingerprint in self._resumable:
                self._resumable.discard(fingerprint)
                return True
            return False
