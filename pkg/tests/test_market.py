"""Market invariants: escrow algebra, claims, answers, conservation."""

from __future__ import annotations

import random
import threading

import pytest

from datastation.blending import Ambiguity
from datastation.errors import (
    AlreadyClaimed,
    InsufficientEscrowFunds,
    InvalidAlternative,
    NotClaimant,
    SelfClaim,
    TaskNotClaimed,
)
from datastation.market import Ledger, Market


def _join_ambiguity(fp="f" * 64, key="join:x"):
    return Ambiguity(
        kind="join_choice",
        alternatives=[
            {
                "description": "join left column 'work address' with right column 'address' (overlap 0.620)",
                "left_asset": "LA", "left_column": "work address", "left_transform": "identity",
                "right_asset": "RA", "right_column": "address", "right_transform": "identity",
                "score": 0.62,
            },
            {
                "description": "join left column 'home address' with right column 'address' (overlap 0.600)",
                "left_asset": "LA", "left_column": "home address", "left_transform": "identity",
                "right_asset": "RA", "right_column": "address", "right_transform": "identity",
                "score": 0.60,
            },
        ],
        capsule_fp=fp,
        context_key=key,
    )


def _why_ambiguity(asset="A1", fp="e" * 64):
    return Ambiguity(
        kind="missing_profile",
        alternatives=[{"description": f"dataset {asset} lacks a human why-profile", "asset": asset}],
        capsule_fp=fp,
        context_key=f"why:{asset}",
    )


def _market(clock=None, ttl=3600.0):
    ledger = Ledger()
    counter = iter(f"{i:032x}" for i in range(1, 100_000))
    market = Market(
        ledger=ledger,
        idgen=counter.__next__,
        clock=clock or (lambda: 0.0),
        prices={"join_disambiguation": 30, "why_profile_request": 50},
        claim_ttl=ttl,
    )
    return market, ledger


def test_join_task_names_both_alternatives():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_join_ambiguity(), "req")
    assert task.kind == "join_disambiguation"
    assert task.price == 30
    assert "work address" in task.description
    assert "home address" in task.description
    assert task.description.startswith("Choose the join for ")
    assert "[0]" in task.description and "[1]" in task.description


def test_why_task_cites_dataset():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_why_ambiguity(asset="D123"), "req")
    assert task.kind == "why_profile_request"
    assert task.price == 50
    assert task.description == (
        "Explain the purpose of dataset D123 (why-profile). "
        "A blocked computation depends on it."
    )


def test_generate_needs_available_funds():
    market, ledger = _market()
    ledger.mint("req", 10)
    with pytest.raises(InsufficientEscrowFunds):
        market.generate(_join_ambiguity(), "req")


def test_claim_transitions_and_self_claim():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_join_ambiguity(), "req")
    with pytest.raises(SelfClaim):
        market.claim(task.id, "req")
    market.claim(task.id, "worker")
    with pytest.raises(AlreadyClaimed):
        market.claim(task.id, "other")


def test_answer_requires_claim_by_respondent():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_join_ambiguity(), "req")
    with pytest.raises(TaskNotClaimed):
        market.submit_answer(task.id, "worker", "0")
    market.claim(task.id, "worker")
    with pytest.raises(NotClaimant):
        market.submit_answer(task.id, "other", "0")


def test_answer_index_bounds():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_join_ambiguity(), "req")
    market.claim(task.id, "worker")
    with pytest.raises(InvalidAlternative):
        market.submit_answer(task.id, "worker", "5")
    with pytest.raises(InvalidAlternative):
        market.submit_answer(task.id, "worker", "yes")


def test_escrow_transfer_matches_ledger_oracle():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_join_ambiguity(), "req")
    assert ledger.account("req").to_record() == {
        "user": "req", "balance": 100, "escrowed": 30, "available": 70,
    }
    total_before = ledger.total()
    market.claim(task.id, "worker")
    market.submit_answer(task.id, "worker", "0")
    assert ledger.account("req").balance == 70
    assert ledger.account("worker").balance == 30
    assert ledger.total() == total_before


def test_answer_applies_join_annotation_and_marks_resumable():
    market, ledger = _market()
    ledger.mint("req", 100)
    applied = []
    market.on_join_answer = applied.append
    task = market.generate(_join_ambiguity(fp="aa" * 32), "req")
    market.claim(task.id, "worker")
    market.submit_answer(task.id, "worker", "1")
    assert applied[0]["left_column"] == "home address"
    assert market.resumable_fingerprints() == {"aa" * 32}
    assert market.consume_resumable("aa" * 32) is True
    assert market.consume_resumable("aa" * 32) is False


def test_why_answer_routes_to_catalog_hook():
    market, ledger = _market()
    ledger.mint("req", 100)
    calls = []
    market.on_why_answer = lambda asset, text, author: calls.append((asset, text, author))
    task = market.generate(_why_ambiguity("D9"), "req")
    market.claim(task.id, "worker")
    market.submit_answer(task.id, "worker", "collected for a metabolite study")
    assert calls == [("D9", "collected for a metabolite study", "worker")]


def test_same_context_same_requester_reuses_task():
    market, ledger = _market()
    ledger.mint("req", 100)
    t1 = market.generate(_join_ambiguity(fp="a" * 64, key="join:k"), "req")
    t2 = market.generate(_join_ambiguity(fp="b" * 64, key="join:k"), "req")
    assert t1.id == t2.id
    assert t1.blocking_fingerprints == {"a" * 64, "b" * 64}
    assert ledger.account("req").escrowed == 30  # one hold, not two


def test_claim_ttl_reopens_task():
    now = {"t": 0.0}
    market, ledger = _market(clock=lambda: now["t"], ttl=100.0)
    ledger.mint("req", 100)
    task = market.generate(_join_ambiguity(), "req")
    market.claim(task.id, "worker")
    now["t"] = 500.0
    assert market.task_of(task.id).status == "open"
    market.claim(task.id, "other")  # claimable again


def test_expire_refunds_escrow():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_join_ambiguity(), "req")
    assert ledger.account("req").available == 70
    market.expire_task(task.id)
    assert ledger.account("req").available == 100
    assert market.task_of(task.id).status == "expired"


def test_notify_why_filled_marks_satisfiable():
    market, ledger = _market()
    ledger.mint("req", 100)
    task = market.generate(_why_ambiguity("D1", fp="c" * 64), "req")
    market.notify_why_filled("D1")
    assert market.task_of(task.id).satisfiable is True
    assert "c" * 64 in market.resumable_fingerprints()


def test_randomized_operations_conserve_currency():
    market, ledger = _market()
    rng = random.Random(99)
    users = [f"u{i}" for i in range(6)]
    for u in users:
        ledger.mint(u, rng.randint(0, 500))
    expected_total = ledger.total()

    open_ids = []
    claimed: dict[str, str] = {}
    ops = 0
    while ops < 1200:
        ops += 1
        action = rng.choice(["generate", "claim", "answer", "expire"])
        if action == "generate":
            requester = rng.choice(users)
            amb = (
                _join_ambiguity(fp=f"{ops:064x}", key=f"join:{ops}")
                if rng.random() < 0.5
                else _why_ambiguity(f"D{ops}", fp=f"{ops:064x}")
            )
            try:
                task = market.generate(amb, requester)
                open_ids.append(task.id)
            except InsufficientEscrowFunds:
                pass
        elif action == "claim" and open_ids:
            tid = rng.choice(open_ids)
            user = rng.choice(users)
            try:
                market.claim(tid, user)
                claimed[tid] = user
            except Exception:
                pass
        elif action == "answer" and claimed:
            tid, user = rng.choice(list(claimed.items()))
            task = market.task_of(tid)
            content = "0" if task.kind == "join_disambiguation" else "some explanation"
            try:
                market.submit_answer(tid, user, content)
                claimed.pop(tid, None)
                open_ids.remove(tid)
            except Exception:
                pass
        elif action == "expire" and open_ids:
            tid = rng.choice(open_ids)
            try:
                market.expire_task(tid)
                open_ids.remove(tid)
                claimed.pop(tid, None)
            except Exception:
                pass
        assert ledger.total() == expected_total
        for u in users:
            acct = ledger.account(u)
            assert acct.balance >= 0
            assert 0 <= acct.escrowed <= acct.balance


def test_concurrent_transfers_never_go_negative():
    ledger = Ledger()
    ledger.mint("payer", 120)
    winners = []

    def take(worker: str):
        try:
            ledger.hold("payer", 40)
            ledger.settle("payer", worker, 40)
            winners.append(worker)
        except InsufficientEscrowFunds:
            pass

    threads = [threading.Thread(target=take, args=(f"w{i}",)) for i in range(10)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(winners) == 3  # 120 / 40
    assert ledger.account("payer").balance == 0
    assert ledger.account("payer").escrowed == 0
    assert ledger.total() == 120
