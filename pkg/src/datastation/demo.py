"""Demo corpus and a deterministic end-to-end walkthrough.

`build_demo_station` seeds a station with a small mixed corpus: open,
closed, brokered, privacy-filtered, PII-bearing, and encrypted datasets,
plus the near-tied join pair that forces a human disambiguation task.
`run_demo_scenario` drives the full loop (upload, capsule, block, answer,
approve, release) and returns the audit log; with fixed seeds two runs
produce identical logs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import keys, records
from .config import StationConfig, UserIdentity
from .errors import AccessDenied
from .policy import AccessPolicy
from .station import Station
from .store import ProfileSeed
from .tabular import ColumnSpec

CLOSED_SENTINELS = ("SECRET-ALPHA-77", "SECRET-BRAVO-13", "SECRET-CHARLIE-99")

POINTS_CSV = "x,y,label\n0,0,A\n0,1,A\n10,10,B\n10,11,B\n"


@dataclass
class DemoCorpus:
    station: Station
    owner_private: bytes
    owner_key: str
    assets: dict[str, str]


def _directory_tables() -> tuple[bytes, bytes]:
    """Left/right pair whose two join choices land 0.62 vs 0.60 overlap."""
    common = [f"C{i}" for i in range(21)]
    work_extra = [f"WX{i}" for i in range(10)]
    home_extra = [f"HX{i}" for i in range(9)]
    work = common + work_extra + [f"WO{i}" for i in range(10)]
    home = common + home_extra + [f"HO{i}" for i in range(10)]
    addresses = common + work_extra + home_extra
    left_rows = [f"P{i},{work[i]},{home[i % len(home)]}" for i in range(len(work))]
    left = "name,work address,home address\n" + "\n".join(left_rows) + "\n"
    right = "address,zip\n" + "\n".join(f"{a},Z{i}" for i, a in enumerate(addresses)) + "\n"
    return left.encode(), right.encode()


def build_demo_station(root: Path, rng_seed: int = 2024, dp_seed: int = 7) -> DemoCorpus:
    config = StationConfig(store_root=Path(root), rng_seed=rng_seed, dp_seed=dp_seed)
    station = Station(config)
    private, public = keys.generate_keypair()
    station.add_user(
        UserIdentity("owner", secret="owner-secret", roles=("contributor", "owner"), key_fingerprint=public)
    )
    station.add_user(UserIdentity("alice", secret="alice-secret", roles=("user",)))
    station.add_user(UserIdentity("bob", secret="bob-secret", roles=("user",)))
    station.add_user(UserIdentity("carol", secret="carol-secret", roles=("user",)))

    def put(content: bytes, access="open", encrypted=False, metadata=None, **policy_kwargs) -> str:
        return station.ingest_dataset(
            content,
            owner_key=public,
            signature=keys.sign_content(private, content),
            default_policy=AccessPolicy(dataset="", access=access, **policy_kwargs),
            encrypted=encrypted,
            metadata=metadata,
        )

    employees = "name,employee_id,city\n" + "\n".join(
        f"E{i},{i},city{i % 5}" for i in range(40)
    ) + "\n"
    salaries = "employee_id,salary\n" + "\n".join(f"{i},{1000 + 10 * i}" for i in range(40)) + "\n"
    directory_left, directory_right = _directory_tables()
    vault = "secret_code,note\n" + "\n".join(f"{s},classified" for s in CLOSED_SENTINELS) + "\n"
    metrics = "name,score\n" + "\n".join(
        f"M{i},{50 + i}" for i in range(5)
    ) + "\n"
    readings = "name,amount\n" + "\n".join(f"R{i},{10 * (i + 1)}" for i in range(6)) + "\n"
    patients = "ssn,dob,name\n111-22-3333,1990-01-01,Pat\n222-33-4444,1985-05-05,Quinn\n"
    cities = "city,country\n" + "\n".join(f"city{i},country{i}" for i in range(5)) + "\n"

    assets = {
        "employees": put(employees.encode()),
        "salaries": put(salaries.encode()),
        "directory": put(directory_left),
        "places": put(directory_right),
        "points": put(POINTS_CSV.encode()),
        "vault": put(vault.encode(), access="closed"),
        "metrics": put(metrics.encode(), access="brokered"),
        "readings": put(
            readings.encode(),
            dp_filter={"epsilon_total": 4.0, "epsilon_per_query": 0.5},
        ),
        "patients": put(patients.encode()),
        "cities": put(cities.encode()),
        "ledger_blob": put(
            b"\x00\x17opaque-bytes",
            access="closed",
            encrypted=True,
            metadata=ProfileSeed(
                schema=[ColumnSpec("entry", "text"), ColumnSpec("value", "number")],
                why_text="escrowed accounting extract, encrypted at source",
                why_author="owner",
            ),
        ),
    }
    station.catalog.upsert_why(assets["cities"], "reference list of city/country pairs", "owner")
    station.discovery.index(assets["cities"])
    return DemoCorpus(station=station, owner_private=private, owner_key=public, assets=assets)


def _capsule(task_type: str, payload: dict, dos: dict) -> str:
    return records.dumps({"task_type": task_type, "payload": payload, "dos": dos, "trust": {}})


JOIN_CAPSULE = _capsule(
    "qbe",
    {"attributes": ["name", "zip"], "example_rows": [["P0", "Z0"]]},
    {"metric": "coverage", "threshold": 1.0},
)
BROKERED_CAPSULE = _capsule(
    "qbe",
    {"attributes": ["name", "score"], "example_rows": [["M0", "50"]]},
    {"metric": "coverage", "threshold": 1.0},
)
CLASSIFY_CAPSULE = _capsule(
    "classify",
    {
        "n_classes": 2,
        "label_column": "label",
        "model_class": "nearest_centroid",
        "test_data": POINTS_CSV,
    },
    {"metric": "accuracy", "threshold": 0.8},
)
SEARCH_CAPSULE = _capsule(
    "search", {"keywords": ["salary"]}, {"metric": "hits", "threshold": 1}
)


def run_demo_scenario(root: Path, rng_seed: int = 2024, dp_seed: int = 7) -> tuple[DemoCorpus, dict]:
    """Upload, block, answer, approve, release; returns corpus + transcript."""
    corpus = build_demo_station(root, rng_seed=rng_seed, dp_seed=dp_seed)
    station = corpus.station
    transcript: dict = {}

    station.fund_account("alice", 100)

    blocked = station.submit_capsule(JOIN_CAPSULE, "alice")
    transcript["blocked_status"] = blocked.status
    transcript["task_ids"] = list(blocked.task_ids)

    task_id = blocked.task_ids[0]
    station.market.claim(task_id, "carol")
    station.market.submit_answer(task_id, "carol", "0")
    resumed = station.capsule_status(blocked.fingerprint)
    transcript["resumed_status"] = resumed.status
    transcript["join_released"] = station.release_result(resumed.result_id, "alice")

    brokered = station.submit_capsule(BROKERED_CAPSULE, "alice")
    transcript["brokered_status"] = brokered.status
    try:
        station.release_result(brokered.result_id, "alice")
        raise AssertionError("brokered release must require a token")
    except AccessDenied as denied:
        request_id = denied.pending_requests[0]
    decided = station.policy.decide_request(request_id, corpus.owner_key, "approve", uses=1)
    transcript["brokered_released"] = station.release_result(
        brokered.result_id, "alice", token=decided.token
    )

    classified = station.submit_capsule(CLASSIFY_CAPSULE, "bob")
    transcript["classify_status"] = classified.status
    released_model = station.release_result(classified.result_id, "bob")
    transcript["model"] = released_model["model"]
    transcript["prediction"] = station.executor.predict(
        released_model["model"], {"x": "1", "y": "0"}
    )

    searched = station.submit_capsule(SEARCH_CAPSULE, "alice")
    transcript["search_status"] = searched.status

    transcript["audit"] = "\n".join(station.audit_lines())
    transcript["ledger"] = {
        user: station.ledger.account(user).to_record() for user in ("alice", "carol")
    }
    return corpus, transcript
