"""Access and governance enforcement.

Three enforcement surfaces live here:

* access policies per dataset (open / closed / brokered, derivation,
  task-type allowlist) with brokered-access requests and owner decisions;
* capability tokens: HMAC-sealed byte strings granting a user scoped,
  optionally expiring or use-limited access to results built from specific
  datasets. Tokens referencing a deleted asset stop verifying.
* differential-privacy budgets: linear epsilon accounting per dataset with
  Laplace noise drawn from a seedable uniform source.

Token wire format: fields in canonical order (token_id, subject, sorted
dataset ids, expiry, uses), each length-prefixed (4-byte big endian), then
HMAC-SHA-256 over that payload; the wire string is base64url(payload||mac).
Decoding is strict: the string must round-trip re-encoding exactly, so any
single-bit corruption fails the MAC check.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import math
import random
import threading
import struct
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import (
    AlreadyDecided,
    BudgetExhausted,
    NoDpPolicy,
    NotFound,
    NotOwner,
    StationError,
)

TASK_TYPES = ("search", "qbe", "classify")
ACCESS_MODES = ("open", "closed", "brokered")

# verify_and_consume denial reasons
BAD_MAC = "BadMac"
EXPIRED = "Expired"
EXHAUSTED = "Exhausted"
REVOKED = "Revoked"
WRONG_SUBJECT = "WrongSubject"
SCOPE_TOO_NARROW = "ScopeTooNarrow"


@dataclass
class AccessPolicy:
    dataset: str
    discoverability: bool = True
    access: str = "closed"
    derivation: str = "allowed"
    allowed_task_types: frozenset[str] = frozenset()
    dp_filter: dict | None = None  # {"epsilon_total": x, "epsilon_per_query": y}

    def __post_init__(self):
        if self.access not in ACCESS_MODES:
            raise StationError(f"unknown access mode {self.access!r}")
        if self.derivation not in ("allowed", "forbidden"):
            raise StationError(f"unknown derivation mode {self.derivation!r}")
        self.allowed_task_types = frozenset(self.allowed_task_types)
        unknown = self.allowed_task_types - set(TASK_TYPES)
        if unknown:
            raise StationError(f"unknown task types: {sorted(unknown)}")
        if self.dp_filter is not None:
            total = float(self.dp_filter["epsilon_total"])
            per = float(self.dp_filter["epsilon_per_query"])
            if total <= 0 or per <= 0:
                raise StationError("epsilon parameters must be positive")
            if per > total:
                raise StationError("epsilon_per_query must not exceed epsilon_total")
            self.dp_filter = {"epsilon_total": total, "epsilon_per_query": per}

    def allows_task(self, task_type: str) -> bool:
        return not self.allowed_task_types or task_type in self.allowed_task_types

    def to_record(self) -> dict:
        return {
            "dataset": self.dataset,
            "discoverability": self.discoverability,
            "access": self.access,
            "derivation": self.derivation,
            "allowed_task_types": sorted(self.allowed_task_types),
            "dp_filter": self.dp_filter,
        }

    @classmethod
    def from_record(cls, record: dict, dataset: str = "") -> "AccessPolicy":
        return cls(
            dataset=record.get("dataset", dataset),
            discoverability=bool(record.get("discoverability", True)),
            access=record.get("access", "closed"),
            derivation=record.get("derivation", "allowed"),
            allowed_task_types=frozenset(record.get("allowed_task_types", ())),
            dp_filter=record.get("dp_filter"),
        )


@dataclass
class GovernancePolicy:
    pii_dictionary: frozenset[str] = frozenset()
    forbid_pii_derivation: bool = False
    allowed_model_classes: frozenset[str] = frozenset({"nearest_centroid"})
    retention_seconds: float | None = None

    def __post_init__(self):
        self.pii_dictionary = frozenset(n.lower() for n in self.pii_dictionary)
        self.allowed_model_classes = frozenset(self.allowed_model_classes)
        if not self.allowed_model_classes:
            raise StationError("allowed_model_classes must be non-empty")

    def to_record(self) -> dict:
        return {
            "pii_dictionary": sorted(self.pii_dictionary),
            "forbid_pii_derivation": self.forbid_pii_derivation,
            "allowed_model_classes": sorted(self.allowed_model_classes),
            "retention": self.retention_seconds,
        }


@dataclass
class EpsilonBudget:
    dataset: str
    epsilon_total: float
    epsilon_spent: float = 0.0


@dataclass
class AccessRequest:
    id: str
    requester: str
    dataset: str
    capsule_fp: str = ""
    status: str = "pending"
    decided_by: str = ""
    token: str = ""  # serialized capability token, set on approval

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "requester": self.requester,
            "dataset": self.dataset,
            "capsule_fp": self.capsule_fp,
            "status": self.status,
            "decided_by": self.decided_by,
            "token": self.token,
        }


@dataclass(frozen=True)
class TokenFields:
    token_id: str
    subject: str
    dataset_ids: frozenset[str]
    expiry: float | None
    uses: int | None


@dataclass(frozen=True)
class Access:
    verdict: str  # allow | deny | needs_approval
    reason: str = ""
    request_id: str = ""

    @property
    def allowed(self) -> bool:
        return self.verdict == "allow"


ALLOW = Access("allow")


def deny(reason: str) -> Access:
    return Access("deny", reason=reason)


@dataclass(frozen=True)
class Violation:
    kind: str  # PII | ModelClassForbidden | DerivationForbidden
    detail: str

    def to_record(self) -> dict:
        return {"kind": self.kind, "detail": self.detail}


def _pack(fields: Iterable[bytes]) -> bytes:
    out = b""
    for f in fields:
        out += struct.pack(">I", len(f)) + f
    return out


def _unpack(payload: bytes, count: int) -> list[bytes]:
    fields, offset = [], 0
    for _ in range(count):
        if offset + 4 > len(payload):
            raise ValueError("truncated payload")
        (n,) = struct.unpack(">I", payload[offset : offset + 4])
        offset += 4
        if offset + n > len(payload):
            raise ValueError("truncated field")
        fields.append(payload[offset : offset + n])
        offset += n
    if offset != len(payload):
        raise ValueError("trailing bytes in payload")
    return fields


def serialize_token(fields: TokenFields, secret: bytes) -> str:
    payload = _pack(
        [
            fields.token_id.encode(),
            fields.subject.encode(),
            ",".join(sorted(fields.dataset_ids)).encode(),
            (repr(fields.expiry) if fields.expiry is not None else "").encode(),
            (str(fields.uses) if fields.uses is not None else "").encode(),
        ]
    )
    mac = hmac.new(secret, payload, hashlib.sha256).digest()
    return base64.urlsafe_b64encode(payload + mac).decode("ascii")


def deserialize_token(wire: str, secret: bytes) -> TokenFields | None:
    """Strictly decode and MAC-check a token; None on any mismatch."""
    try:
        raw = base64.urlsafe_b64decode(wire.encode("ascii"))
        if base64.urlsafe_b64encode(raw).decode("ascii") != wire:
            return None  # non-canonical encoding (e.g. flipped padding bits)
        if len(raw) < 32:
            return None
        payload, mac = raw[:-32], raw[-32:]
        if not hmac.compare_digest(hmac.new(secret, payload, hashlib.sha256).digest(), mac):
            return None
        token_id, subject, ids, expiry, uses = [f.decode() for f in _unpack(payload, 5)]
        return TokenFields(
            token_id=token_id,
            subject=subject,
            dataset_ids=frozenset(i for i in ids.split(",") if i),
            expiry=float(expiry) if expiry else None,
            uses=int(uses) if uses else None,
        )
    except Exception:
        return None


class PolicyEngine:
    def __init__(
        self,
        secret: bytes,
        idgen: Callable[[], str],
        clock: Callable[[], float],
        owner_of: Callable[[str], str],
        dp_rng: random.Random | None = None,
    ):
        self._secret = secret
        self._idgen = idgen
        self._clock = clock
        self._owner_of = owner_of  # asset id -> owner key fingerprint ('' if derived)
        self._dp_rng = dp_rng if dp_rng is not None else random.SystemRandom()
        self._policies: dict[str, AccessPolicy] = {}
        self._budgets: dict[str, EpsilonBudget] = {}
        self._requests: dict[str, AccessRequest] = {}
        self._token_uses: dict[str, int] = {}
        self._minted: dict[str, TokenFields] = {}
        self._revoked_assets: set[str] = set()
        self._governance = GovernancePolicy()
        self._lock = threading.RLock()

    # -- registration -----------------------------------------------------------

    def register(self, policy: AccessPolicy) -> None:
        with self._lock:
            self._policies[policy.dataset] = policy
            if policy.dp_filter:
                budget = self._budgets.get(policy.dataset)
                total = policy.dp_filter["epsilon_total"]
                if budget is None:
                    self._budgets[policy.dataset] = EpsilonBudget(policy.dataset, total)
                else:
                    budget.epsilon_total = total

    def get(self, dataset: str) -> AccessPolicy:
        policy = self._policies.get(dataset)
        if policy is None:
            raise NotFound(f"no access policy registered for {dataset}")
        return policy

    def has_policy(self, dataset: str) -> bool:
        return dataset in self._policies

    def set_governance(self, governance: GovernancePolicy) -> None:
        self._governance = governance

    @property
    def governance(self) -> GovernancePolicy:
        return self._governance

    def is_owner(self, key_fingerprint: str, dataset: str) -> bool:
        return bool(key_fingerprint) and self._owner_of(dataset) == key_fingerprint

    # -- access evaluation --------------------------------------------------------

    def evaluate_access(
        self,
        user: str,
        dataset: str,
        task_type: str,
        capsule_fp: str = "",
        user_key: str = "",
    ) -> Access:
        policy = self.get(dataset)
        if self.is_owner(user_key, dataset):
            return ALLOW
        if not policy.allows_task(task_type):
            return deny("TaskTypeForbidden")
        if policy.access == "open":
            return ALLOW
        if policy.access == "closed":
            return deny("Closed")
        with self._lock:
            if self._standing_token_covers(user, dataset):
                return ALLOW
            for req in self._requests.values():
                if req.requester == user and req.dataset == dataset:
                    if req.status == "approved":
                        return ALLOW
                    if req.status == "pending":
                        return Access("needs_approval", request_id=req.id)
            req = AccessRequest(
                id=self._idgen(), requester=user, dataset=dataset, capsule_fp=capsule_fp
            )
            self._requests[req.id] = req
            return Access("needs_approval", request_id=req.id)

    def _standing_token_covers(self, user: str, dataset: str) -> bool:
        """A previously minted token still grants (user, dataset)."""
        for fields in self._minted.values():
            if fields.subject != user or dataset not in fields.dataset_ids:
                continue
            if fields.dataset_ids & self._revoked_assets:
                continue
            if fields.expiry is not None and self._clock() > fields.expiry:
                continue
            if fields.uses is not None:
                if self._token_uses.get(fields.token_id, fields.uses) <= 0:
                    continue
            return True
        return False

    def request_of(self, request_id: str) -> AccessRequest:
        req = self._requests.get(request_id)
        if req is None:
            raise NotFound(f"access request {request_id} does not exist")
        return req

    def requests_for(self, user: str = "", owner_key: str = "") -> list[AccessRequest]:
        with self._lock:
            out = []
            for req in self._requests.values():
                if user and req.requester == user:
                    out.append(req)
                elif owner_key and self._owner_of(req.dataset) == owner_key:
                    out.append(req)
            return sorted(out, key=lambda r: r.id)

    def decide_request(
        self,
        request_id: str,
        owner_key: str,
        decision: str,
        expiry: float | None = None,
        uses: int | None = None,
    ) -> AccessRequest:
        if decision not in ("approve", "deny"):
            raise StationError(f"decision must be approve or deny, got {decision!r}")
        with self._lock:
            req = self.request_of(request_id)
            if not self.is_owner(owner_key, req.dataset):
                raise NotOwner("only the dataset owner may decide this request")
            if req.status != "pending":
                raise AlreadyDecided(f"request {request_id} is already {req.status}")
            req.decided_by = owner_key
            if decision == "deny":
                req.status = "denied"
                return req
            req.status = "approved"
            req.token = self.mint_token(req.requester, {req.dataset}, expiry=expiry, uses=uses)
            return req

    # -- capability tokens -----------------------------------------------------------

    def mint_token(
        self,
        subject: str,
        dataset_ids: Iterable[str],
        expiry: float | None = None,
        uses: int | None = None,
    ) -> str:
        if uses is not None and uses < 1:
            raise StationError("uses_remaining must be positive when bounded")
        fields = TokenFields(
            token_id=self._idgen(),
            subject=subject,
            dataset_ids=frozenset(dataset_ids),
            expiry=expiry,
            uses=uses,
        )
        with self._lock:
            self._minted[fields.token_id] = fields
            if fields.uses is not None:
                self._token_uses[fields.token_id] = fields.uses
        return serialize_token(fields, self._secret)

    def verify_and_consume(self, wire: str, user: str, needed: Iterable[str]) -> Access:
        fields = deserialize_token(wire, self._secret)
        if fields is None:
            return deny(BAD_MAC)
        with self._lock:
            if fields.dataset_ids & self._revoked_assets:
                return deny(REVOKED)
            if fields.subject != user:
                return deny(WRONG_SUBJECT)
            if not set(needed) <= fields.dataset_ids:
                return deny(SCOPE_TOO_NARROW)
            if fields.expiry is not None and self._clock() > fields.expiry:
                return deny(EXPIRED)
            if fields.uses is not None:
                remaining = self._token_uses.setdefault(fields.token_id, fields.uses)
                if remaining <= 0:
                    return deny(EXHAUSTED)
                self._token_uses[fields.token_id] = remaining - 1
            return ALLOW

    def token_still_valid(self, wire: str, user: str, needed: Iterable[str]) -> bool:
        """Peek without consuming a use (pre-checks, discovery visibility)."""
        fields = deserialize_token(wire, self._secret)
        if fields is None:
            return False
        with self._lock:
            if fields.dataset_ids & self._revoked_assets:
                return False
            if fields.subject != user or not set(needed) <= fields.dataset_ids:
                return False
            if fields.expiry is not None and self._clock() > fields.expiry:
                return False
            if fields.uses is not None:
                if self._token_uses.setdefault(fields.token_id, fields.uses) <= 0:
                    return False
        return True

    def revoke_assets(self, asset_ids: set[str]) -> None:
        """Store hook: tokens touching any of these ids stop verifying."""
        with self._lock:
            self._revoked_assets |= asset_ids

    # -- differential privacy -----------------------------------------------------------

    def apply_dp(
        self,
        dataset: str,
        value: float,
        sensitivity: float,
        epsilon: float | None = None,
    ) -> float:
        policy = self.get(dataset)
        if not policy.dp_filter:
            raise NoDpPolicy(f"dataset {dataset} has no differential-privacy filter")
        per_query = policy.dp_filter["epsilon_per_query"]
        if epsilon is not None and not math.isclose(epsilon, per_query, rel_tol=1e-9):
            raise StationError(
                f"epsilon per query is fixed by policy at {per_query}, got {epsilon}"
            )
        if sensitivity <= 0:
            raise StationError("sensitivity must be positive")
        with self._lock:
            budget = self._budgets[dataset]
            if budget.epsilon_spent + per_query > budget.epsilon_total + 1e-9:
                raise BudgetExhausted(
                    f"dataset {dataset}: spent {budget.epsilon_spent:.6g} of "
                    f"{budget.epsilon_total:.6g}, next query needs {per_query:.6g}"
                )
            budget.epsilon_spent += per_query
            noise = self._laplace(sensitivity / per_query)
        return value + noise

    def _laplace(self, scale: float) -> float:
        # Inverse-CDF sampling from the seedable uniform source.
        u = self._dp_rng.random() - 0.5
        abs_u = min(abs(u), 0.5 - 1e-16)
        return -scale * math.copysign(math.log1p(-2.0 * abs_u), u)

    def budget_of(self, dataset: str) -> EpsilonBudget:
        with self._lock:
            budget = self._budgets.get(dataset)
            if budget is None:
                raise NoDpPolicy(f"dataset {dataset} has no differential-privacy filter")
            return EpsilonBudget(budget.dataset, budget.epsilon_total, budget.epsilon_spent)

    def reset_budget(self, dataset: str, owner_key: str) -> None:
        if not self.is_owner(owner_key, dataset):
            raise NotOwner("only the dataset owner may reset its privacy budget")
        with self._lock:
            budget = self._budgets.get(dataset)
            if budget is None:
                raise NoDpPolicy(f"dataset {dataset} has no differential-privacy filter")
            budget.epsilon_spent = 0.0

    # -- governance ------------------------------------------------------------------

    def check_governance(self, plan, task_type: str, model_class: str = "") -> list[Violation]:
        """Violations for a blend plan; empty list means pass.

        `plan` needs `.inputs` (asset ids) and `.columns_read()` yielding
        (asset id, column name) pairs.
        """
        g = self._governance
        violations: list[Violation] = []
        if g.forbid_pii_derivation:
            flagged = sorted(
                {
                    col.lower()
                    for _, col in plan.columns_read()
                    if col.lower() in g.pii_dictionary
                }
            )
            for col in flagged:
                violations.append(Violation("PII", f"column {col}"))
        if task_type == "classify" and model_class not in g.allowed_model_classes:
            violations.append(Violation("ModelClassForbidden", f"model class {model_class}"))
        if len(plan.inputs) > 1:
            for dataset in plan.inputs:
                if self.has_policy(dataset) and self.get(dataset).derivation == "forbidden":
                    violations.append(Violation("DerivationForbidden", f"dataset {dataset}"))
        return violations

    # -- visibility -------------------------------------------------------------------

    def dataset_visible(self, user_key: str, dataset: str) -> bool:
        """Schema-level visibility of one original dataset to one user key."""
        try:
            policy = self.get(dataset)
        except NotFound:
            return False
        if self.is_owner(user_key, dataset):
            return True
        return policy.discoverability and policy.access != "closed"

    def access_mode_of(self, dataset: str) -> str:
        try:
            return self.get(dataset).access
        except NotFound:
            return "closed"
