"""When the engine cannot choose, a human gets paid to decide.

Two join candidates (work address vs home address) score within the tie
tolerance, so execution blocks, posts a priced task, and resumes once a
human picks. The requester's escrow pays the answerer.

Run: python demos/03_blocked_join_market.py
"""

import tempfile
from pathlib import Path

from datastation.demo import JOIN_CAPSULE, build_demo_station

corpus = build_demo_station(Path(tempfile.mkdtemp()) / "station")
station = corpus.station

station.fund_account("alice", 100)
status = station.submit_capsule(JOIN_CAPSULE, "alice")
print("capsule status:", status.status)

task = station.market.task_of(status.task_ids[0])
print(f"\nposted task ({task.price} units):\n{task.description}\n")
print("alice's ledger:", station.ledger.account("alice").to_record())

station.market.claim(task.id, "carol")
station.market.submit_answer(task.id, "carol", "0")  # the work-address join
print("carol answered; ledger now:")
print("  alice:", station.ledger.account("alice").to_record())
print("  carol:", station.ledger.account("carol").to_record())

resumed = station.capsule_status(status.fingerprint)
print("\nafter the answer the capsule is:", resumed.status)
table = station.release_result(resumed.result_id, "alice")["table"]
print(f"released {len(table['rows'])} joined rows, e.g. {table['rows'][0]}")

print("\nthe chosen join is remembered corpus-wide: identical future requests")
print("skip the ambiguity and reuse the cached evaluation.")
