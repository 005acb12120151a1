"""HTTP+JSON surface of the station.

Every endpoint delegates to exactly one engine operation and returns
canonical records; error bodies carry the engine error name under
`error`. Authentication is a per-user bearer secret from the station
config; contributor uploads additionally authenticate through the content
signature itself.
"""

from __future__ import annotations

import json

from fastapi import Depends, FastAPI, File, Form, Header, Request, UploadFile
from fastapi.responses import JSONResponse

from .catalog import CatalogQuery
from .config import UserIdentity
from .errors import AccessDenied, AuthRequired, StationError
from .policy import AccessPolicy
from .station import Station
from .store import ProfileSeed
from .tabular import ColumnSpec

# The complete, documented endpoint inventory. Conformance tests (and the
# console's recorded-traffic check) treat anything else as undocumented.
DOCUMENTED_ENDPOINTS: tuple[tuple[str, str], ...] = (
    ("POST", "/datasets"),
    ("POST", "/datasets/bulk"),
    ("PUT", "/datasets/{dataset_id}"),
    ("DELETE", "/datasets/{dataset_id}"),
    ("GET", "/catalog/search"),
    ("POST", "/capsules"),
    ("GET", "/capsules/{fingerprint}"),
    ("GET", "/results/{result_id}"),
    ("POST", "/models/{model_id}/predict"),
    ("GET", "/access-requests"),
    ("POST", "/access-requests"),
    ("POST", "/access-requests/{request_id}/decision"),
    ("POST", "/tokens/verify"),
    ("GET", "/tasks"),
    ("POST", "/tasks/{task_id}/claim"),
    ("POST", "/tasks/{task_id}/answer"),
    ("GET", "/ledger/me"),
    ("POST", "/ledger/fund"),
    ("GET", "/audit"),
)


def create_app(station: Station) -> FastAPI:
    app = FastAPI(title="datastation", docs_url=None, redoc_url=None, openapi_url=None)

    def identity(authorization: str = Header(default="")) -> UserIdentity:
        secret = authorization.removeprefix("Bearer ").strip()
        ident = station.identity_for_secret(secret)
        if ident is None:
            raise AuthRequired("unknown or missing bearer secret")
        return ident

    @app.exception_handler(StationError)
    async def station_error_handler(_request: Request, exc: StationError):
        body = {"error": exc.code, "detail": exc.detail}
        if getattr(exc, "violations", None):
            body["violations"] = [
                v.to_record() if hasattr(v, "to_record") else v for v in exc.violations
            ]
        if getattr(exc, "pending_requests", None):
            body["pending_requests"] = exc.pending_requests
        return JSONResponse(status_code=exc.http_status, content=body)

    # -- datasets ---------------------------------------------------------------

    def _parse_policy(policy_text: str) -> AccessPolicy:
        try:
            record = json.loads(policy_text) if policy_text else {}
        except json.JSONDecodeError as exc:
            raise StationError(f"policy is not a valid record: {exc}") from exc
        return AccessPolicy.from_record(record, dataset="pending")

    def _owner_key(ident: UserIdentity, supplied: str) -> str:
        key = supplied or ident.key_fingerprint
        if not key:
            raise StationError("contributor uploads need an owner key fingerprint")
        return key

    @app.post("/datasets", status_code=201)
    async def upload_dataset(
        csv: UploadFile = File(...),
        signature: str = Form(...),
        policy: str = Form(default=""),
        owner_key: str = Form(default=""),
        encrypted: bool = Form(default=False),
        metadata: str = Form(default=""),
        ident: UserIdentity = Depends(identity),
    ):
        seed = None
        if metadata:
            record = json.loads(metadata)
            seed = ProfileSeed(
                schema=[ColumnSpec(c["name"], c.get("dtype", "text")) for c in record.get("schema", [])]
                or None,
                why_text=record.get("why_text", ""),
                why_author=record.get("why_author", ident.user_id),
            )
        content = await csv.read()
        dataset_id = station.ingest_dataset(
            content,
            owner_key=_owner_key(ident, owner_key),
            signature=signature,
            default_policy=_parse_policy(policy),
            encrypted=encrypted,
            metadata=seed,
        )
        return {"dataset_id": dataset_id}

    @app.post("/datasets/bulk", status_code=201)
    async def upload_bulk(
        archive: UploadFile = File(...),
        policy: str = Form(default=""),
        owner_key: str = Form(default=""),
        ident: UserIdentity = Depends(identity),
    ):
        content = await archive.read()
        ids = station.bulk_ingest(
            content, owner_key=_owner_key(ident, owner_key), default_policy=_parse_policy(policy)
        )
        return {"dataset_ids": ids}

    @app.put("/datasets/{dataset_id}")
    async def update_dataset(
        dataset_id: str,
        csv: UploadFile = File(...),
        signature: str = Form(...),
        owner_key: str = Form(default=""),
        ident: UserIdentity = Depends(identity),
    ):
        content = await csv.read()
        version = station.update_dataset(
            dataset_id, content, owner_key=_owner_key(ident, owner_key), signature=signature
        )
        return {"dataset_id": dataset_id, "version": version}

    @app.delete("/datasets/{dataset_id}")
    def delete_dataset(dataset_id: str, ident: UserIdentity = Depends(identity)):
        deleted = station.delete_dataset(dataset_id, requester_key=ident.key_fingerprint)
        return {"deleted": sorted(deleted)}

    # -- catalog ------------------------------------------------------------------

    @app.get("/catalog/search")
    def catalog_search(
        creator: str = "",
        created_after: float | None = None,
        requires_why: bool = False,
        max_depth: int | None = None,
        keyword: str = "",
        ident: UserIdentity = Depends(identity),
    ):
        query = CatalogQuery(
            creator_in=set(creator.split(",")) if creator else None,
            created_after=created_after,
            requires_why=requires_why,
            max_depth=max_depth,
            keyword=keyword or None,
        )
        ids = station.catalog_search(ident.user_id, query)
        return {"assets": ids}

    # -- capsules -------------------------------------------------------------------

    @app.post("/capsules", status_code=202)
    async def submit_capsule(request: Request, ident: UserIdentity = Depends(identity)):
        document = await request.body()
        status = station.submit_capsule(document, user=ident.user_id)
        return status.to_record()

    @app.get("/capsules/{fingerprint}")
    def capsule_status(fingerprint: str, ident: UserIdentity = Depends(identity)):
        status = station.capsule_status(fingerprint)
        if status.submitter != ident.user_id:
            raise AccessDenied("capsule belongs to a different submitter")
        return status.to_record()

    # -- results ----------------------------------------------------------------------

    @app.get("/results/{result_id}")
    def release_result(result_id: str, token: str = "", ident: UserIdentity = Depends(identity)):
        content = station.release_result(result_id, user=ident.user_id, token=token or None)
        return content

    @app.post("/models/{model_id}/predict")
    async def predict(model_id: str, request: Request, ident: UserIdentity = Depends(identity)):
        body = await request.body()
        record = json.loads(body) if body else {}
        row = record.get("row", record)
        label = station.executor.predict(model_id, row)
        return {"label": label}

    # -- access requests -----------------------------------------------------------------

    @app.get("/access-requests")
    def list_requests(ident: UserIdentity = Depends(identity)):
        mine = station.policy.requests_for(user=ident.user_id)
        owned = (
            station.policy.requests_for(owner_key=ident.key_fingerprint)
            if ident.key_fingerprint
            else []
        )
        seen = {r.id for r in mine}
        return {"requests": [r.to_record() for r in mine + [r for r in owned if r.id not in seen]]}

    @app.post("/access-requests", status_code=201)
    async def create_request(request: Request, ident: UserIdentity = Depends(identity)):
        record = json.loads(await request.body())
        access = station.policy.evaluate_access(
            user=ident.user_id,
            dataset=record["dataset"],
            task_type=record.get("task_type", "qbe"),
            capsule_fp=record.get("capsule_fp", ""),
            user_key=ident.key_fingerprint,
        )
        return {"verdict": access.verdict, "reason": access.reason, "request_id": access.request_id}

    @app.post("/access-requests/{request_id}/decision")
    async def decide_request(
        request_id: str, request: Request, ident: UserIdentity = Depends(identity)
    ):
        record = json.loads(await request.body())
        decided = station.policy.decide_request(
            request_id,
            owner_key=ident.key_fingerprint,
            decision=record.get("decision", ""),
            expiry=record.get("expiry"),
            uses=record.get("uses"),
        )
        return decided.to_record()

    @app.post("/tokens/verify")
    async def verify_token(request: Request, ident: UserIdentity = Depends(identity)):
        record = json.loads(await request.body())
        access = station.policy.verify_and_consume(
            record.get("token", ""), ident.user_id, record.get("dataset_ids", [])
        )
        return {"verdict": access.verdict, "reason": access.reason}

    # -- market ---------------------------------------------------------------------------

    @app.get("/tasks")
    def list_tasks(mine: bool = False, ident: UserIdentity = Depends(identity)):
        if mine:
            tasks = station.market.tasks_requested_by(ident.user_id)
        else:
            tasks = station.market.open_tasks(viewer=ident.user_id)
        return {"tasks": [t.to_record() for t in tasks]}

    @app.post("/tasks/{task_id}/claim")
    def claim_task(task_id: str, ident: UserIdentity = Depends(identity)):
        task = station.market.claim(task_id, ident.user_id)
        return task.to_record()

    @app.post("/tasks/{task_id}/answer")
    async def answer_task(task_id: str, request: Request, ident: UserIdentity = Depends(identity)):
        record = json.loads(await request.body())
        answer = station.market.submit_answer(task_id, ident.user_id, str(record.get("content", "")))
        return answer.to_record()

    @app.get("/ledger/me")
    def ledger_me(ident: UserIdentity = Depends(identity)):
        return station.ledger.account(ident.user_id).to_record()

    @app.post("/ledger/fund")
    async def fund(request: Request, ident: UserIdentity = Depends(identity)):
        if not ident.has_role("owner"):
            raise AccessDenied("funding accounts needs the owner role")
        record = json.loads(await request.body())
        station.fund_account(record["user"], int(record["amount"]))
        return station.ledger.account(record["user"]).to_record()

    # -- audit -------------------------------------------------------------------------------

    @app.get("/audit")
    def audit(ident: UserIdentity = Depends(identity)):
        if not ident.has_role("owner"):
            raise AccessDenied("the audit log is owner-only")
        return {"lines": station.audit_lines()}

    return app
