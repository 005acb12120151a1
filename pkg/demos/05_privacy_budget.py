"""Differential-privacy filters: noisy answers until the budget runs dry.

The readings dataset carries a dp_filter, so query results over it leave
only as Laplace-noised aggregates, and each release spends epsilon from the
dataset's budget.

Run: python demos/05_privacy_budget.py
"""

import tempfile
from pathlib import Path

from datastation.demo import build_demo_station
from datastation.errors import BudgetExhausted

corpus = build_demo_station(Path(tempfile.mkdtemp()) / "station", dp_seed=1234)
station = corpus.station
readings = corpus.assets["readings"]

budget = station.policy.budget_of(readings)
print(f"budget: total={budget.epsilon_total}, per query={0.5}, spent={budget.epsilon_spent}")

true_count = 6.0
print("\nnoised counts (true value 6):")
spent = 0
while True:
    try:
        noisy = station.policy.apply_dp(readings, true_count, sensitivity=1.0)
    except BudgetExhausted as exc:
        print(f"  -> {exc.code}: {exc.detail}")
        break
    spent += 1
    print(f"  query {spent}: {noisy:.3f}")

budget = station.policy.budget_of(readings)
print(f"\nafter {spent} queries: spent={budget.epsilon_spent} of {budget.epsilon_total}")
print("the owner may reset the budget; nobody else can:")
station.policy.reset_budget(readings, corpus.owner_key)
print("reset ok; spent =", station.policy.budget_of(readings).epsilon_spent)
