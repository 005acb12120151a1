"""Error types shared across the station.

Every error carries a stable `code` used verbatim in API error bodies, so
clients can match on it without parsing prose.
"""

from __future__ import annotations


class StationError(Exception):
    code = "StationError"
    http_status = 400

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail


class NotFound(StationError):
    code = "NotFound"
    http_status = 404


class SignatureInvalid(StationError):
    code = "SignatureInvalid"


class MalformedCsv(StationError):
    code = "MalformedCsv"


class EncryptedWithoutMetadata(StationError):
    code = "EncryptedWithoutMetadata"


class NotOwner(StationError):
    code = "NotOwner"
    http_status = 403


class UnknownParent(StationError):
    code = "UnknownParent"


class CycleDetected(StationError):
    code = "CycleDetected"


class EmptyText(StationError):
    code = "EmptyText"


class NotProfiled(StationError):
    code = "NotProfiled"


class BudgetExhausted(StationError):
    code = "BudgetExhausted"
    http_status = 403


class NoDpPolicy(StationError):
    code = "NoDpPolicy"


class AlreadyDecided(StationError):
    code = "AlreadyDecided"
    http_status = 409


class UnknownTaskType(StationError):
    code = "UnknownTaskType"


class PayloadMismatch(StationError):
    code = "PayloadMismatch"

    def __init__(self, detail: str = "", violations: list[str] | None = None):
        super().__init__(detail)
        self.violations = violations or ([detail] if detail else [])


class DosMismatch(StationError):
    code = "DosMismatch"


class MalformedDocument(StationError):
    code = "MalformedDocument"

    def __init__(self, detail: str = "", violations: list[str] | None = None):
        super().__init__(detail)
        self.violations = violations or ([detail] if detail else [])


class NoViablePlan(StationError):
    code = "NoViablePlan"


class GovernanceViolation(StationError):
    code = "GovernanceViolation"
    http_status = 403

    def __init__(self, detail: str = "", violations: list | None = None):
        super().__init__(detail)
        self.violations = violations or []


class JoinEmpty(StationError):
    code = "JoinEmpty"


class SchemaMismatch(StationError):
    code = "SchemaMismatch"


class AccessDenied(StationError):
    code = "AccessDenied"
    http_status = 403


class Revoked(AccessDenied):
    code = "Revoked"
    http_status = 410


class InsufficientEscrowFunds(StationError):
    code = "InsufficientEscrowFunds"


class AlreadyClaimed(StationError):
    code = "AlreadyClaimed"
    http_status = 409


class SelfClaim(StationError):
    code = "SelfClaim"


class NotClaimant(StationError):
    code = "NotClaimant"
    http_status = 403


class TaskNotClaimed(StationError):
    code = "TaskNotClaimed"


class InvalidAlternative(StationError):
    code = "InvalidAlternative"


class AuthRequired(StationError):
    code = "AuthRequired"
    http_status = 401
