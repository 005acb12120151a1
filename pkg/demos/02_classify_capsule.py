"""A data-unaware classification request, end to end.

The user never sees the training data: they ship test rows plus a
satisfaction bar (accuracy >= 0.8), the station finds similar sealed data,
trains, and serves the model only as a prediction endpoint.

Run: python demos/02_classify_capsule.py
"""

import tempfile
from pathlib import Path

from datastation import Station, StationConfig, keys, records
from datastation.config import UserIdentity
from datastation.policy import AccessPolicy

root = Path(tempfile.mkdtemp()) / "station"
station = Station(StationConfig(store_root=root, rng_seed=2))
private, public = keys.generate_keypair()
station.add_user(UserIdentity("lab", secret="s1", roles=("contributor",), key_fingerprint=public))

training = b"x,y,label\n0,0,A\n0,1,A\n10,10,B\n10,11,B\n"
station.ingest_dataset(
    training, public, keys.sign_content(private, training),
    AccessPolicy(dataset="", access="open"),
)

capsule = records.dumps(
    {
        "task_type": "classify",
        "payload": {
            "n_classes": 2,
            "label_column": "label",
            "model_class": "nearest_centroid",
            "test_data": "x,y,label\n0,0,A\n0,1,A\n10,10,B\n10,11,B\n",
        },
        "dos": {"metric": "accuracy", "threshold": 0.8},
        "trust": {},
    }
)
status = station.submit_capsule(capsule, "researcher")
print(f"capsule {status.fingerprint[:12]}... -> {status.status} (accuracy {status.best_dos})")

released = station.release_result(status.result_id, "researcher")
print("release payload:", released)

for point in [("1", "0"), ("9", "12"), ("5", "4")]:
    label = station.executor.predict(released["model"], {"x": point[0], "y": point[1]})
    print(f"predict{point} -> {label}")

print("\nmodel parameters never leave the station; only labels do.")
