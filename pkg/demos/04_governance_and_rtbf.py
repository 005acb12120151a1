"""Governance gates and the right to be forgotten.

A plan that reads a PII column is refused outright. Deleting a dataset
cascades through everything derived from it, revokes every token that
referenced it, and scrubs the result cache.

Run: python demos/04_governance_and_rtbf.py
"""

import tempfile
from pathlib import Path

from datastation import Station, StationConfig, keys, records
from datastation.config import UserIdentity
from datastation.errors import GovernanceViolation, Revoked
from datastation.policy import AccessPolicy, GovernancePolicy

root = Path(tempfile.mkdtemp()) / "station"
station = Station(StationConfig(store_root=root, rng_seed=4))
private, public = keys.generate_keypair()
station.add_user(UserIdentity("lab", secret="s1", roles=("contributor",), key_fingerprint=public))
station.policy.set_governance(
    GovernancePolicy(pii_dictionary=frozenset({"ssn", "dob"}), forbid_pii_derivation=True)
)


def put(content: bytes) -> str:
    return station.ingest_dataset(
        content, public, keys.sign_content(private, content),
        AccessPolicy(dataset="", access="open"),
    )


patients = put(b"ssn,city\n111-22,paris\n333-44,oslo\n")
status = station.submit_capsule(
    records.dumps(
        {
            "task_type": "qbe",
            "payload": {"attributes": ["ssn"], "example_rows": [["111-22"]]},
            "dos": {"metric": "coverage", "threshold": 0.5},
            "trust": {},
        }
    ),
    "analyst",
)
print("capsule over the ssn column:", status.status, "(the PII gate refused every plan)")

# RTBF: a model trained on points, then the training data is deleted
points = put(b"x,y,label\n0,0,A\n0,1,A\n10,10,B\n10,11,B\n")
classify = station.submit_capsule(
    records.dumps(
        {
            "task_type": "classify",
            "payload": {
                "n_classes": 2, "label_column": "label",
                "model_class": "nearest_centroid",
                "test_data": "x,y,label\n0,0,A\n10,10,B\n",
            },
            "dos": {"metric": "accuracy", "threshold": 0.8},
            "trust": {},
        }
    ),
    "analyst",
)
model = station.release_result(classify.result_id, "analyst")["model"]
token = station.policy.mint_token("analyst", {points})
print("model served:", station.executor.predict(model, {"x": "1", "y": "0"}))

deleted = station.delete_dataset(points, requester_key=public)
print(f"\ncascade deleted {len(deleted)} assets (dataset, blended table, model)")
try:
    station.executor.predict(model, {"x": "1", "y": "0"})
except Revoked as exc:
    print("model now answers:", exc.code, "-", exc.detail)
verdict = station.policy.verify_and_consume(token, "analyst", {points})
print("old token verdict:", verdict.verdict, verdict.reason)
print("result cache mentions deleted assets:",
      bool(station.executor.cache.referenced_assets() & deleted))
