"""Contribute datasets and look at what the catalog learns about them.

Everything a contributor uploads is sealed: the station keeps the bytes,
verifies the signature, and from then on only profiles (schema-level
metadata) are visible to anyone.

Run: python demos/01_seal_and_profile.py
"""

import tempfile
from pathlib import Path

from datastation import Station, StationConfig, keys
from datastation.catalog import CatalogQuery
from datastation.config import UserIdentity
from datastation.policy import AccessPolicy

root = Path(tempfile.mkdtemp()) / "station"
station = Station(StationConfig(store_root=root, rng_seed=1))

private, public = keys.generate_keypair()
station.add_user(UserIdentity("lab", secret="s1", roles=("contributor",), key_fingerprint=public))

employees = b"name,employee_id,hired\nAda,1,2020-01-15\nBob,2,2021-06-01\nCid,3,2021-07-09\n"
asset = station.ingest_dataset(
    employees,
    owner_key=public,
    signature=keys.sign_content(private, employees),
    default_policy=AccessPolicy(dataset="", access="open"),
)
print(f"sealed dataset {asset} (version 1)")

profile = station.catalog.get(asset)
print("\nwhat the catalog extracted:")
for col in profile.what:
    print(
        f"  {col.name:12s} dtype={col.dtype:6s} rows={col.row_count} "
        f"distinct={col.distinct_estimate} top={col.top_values[:2]}"
    )
print(f"  sketch length per column: {len(profile.what[0].sketch)}")
print(f"when: created_at={profile.when['created_at']}")
print(f"where: access_mode={profile.where['access_mode']}")

station.catalog.upsert_why(asset, "HR roster used for the onboarding demo", "lab")
print("\nwhy-profile:", station.catalog.get(asset).why)

hits = station.catalog_search("anyone", CatalogQuery(keyword="employee"))
print("\ncatalog search for 'employee':", hits)

print("\nraw rows stay inside the station; callers only ever see the above.")
