"""The same flows over the HTTP surface the console and CLI use.

Drives the FastAPI app in-process (no port needed) through upload, capsule,
block, answer, approve, and release. To run against a real server instead:

    station serve --config station.conf &
    STATION_URL=http://127.0.0.1:8000 STATION_IDENTITY=alice-secret station tasks

Run: python demos/06_http_walkthrough.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from datastation.demo import JOIN_CAPSULE, build_demo_station
from datastation.service import create_app

corpus = build_demo_station(Path(tempfile.mkdtemp()) / "station")
client = TestClient(create_app(corpus.station), raise_server_exceptions=False)

OWNER = {"Authorization": "Bearer owner-secret"}
ALICE = {"Authorization": "Bearer alice-secret"}
CAROL = {"Authorization": "Bearer carol-secret"}

client.post("/ledger/fund", content=json.dumps({"user": "alice", "amount": 100}), headers=OWNER)

submitted = client.post("/capsules", content=JOIN_CAPSULE, headers=ALICE).json()
print("POST /capsules ->", submitted["status"], submitted["task_ids"])

tasks = client.get("/tasks", headers=CAROL).json()["tasks"]
print("GET /tasks (as carol) ->", [t["id"][:8] for t in tasks])
task_id = tasks[0]["id"]
client.post(f"/tasks/{task_id}/claim", headers=CAROL)
client.post(f"/tasks/{task_id}/answer", content=json.dumps({"content": "0"}), headers=CAROL)
print("carol answered; GET /ledger/me ->", client.get("/ledger/me", headers=CAROL).json())

polled = client.get(f"/capsules/{submitted['fingerprint']}", headers=ALICE).json()
print("GET /capsules/{fp} ->", polled["status"])

released = client.get(f"/results/{polled['result_id']}", headers=ALICE).json()
print("GET /results/{id} ->", len(released["table"]["rows"]), "rows")

audit = client.get("/audit", headers=OWNER).json()["lines"]
print("GET /audit ->", len(audit), "candidate evaluations recorded")
