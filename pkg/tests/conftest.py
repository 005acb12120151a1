"""Shared fixtures: a wired station on a temp directory plus demo users.

Also a tiny terminal plugin: every test in test_acceptance.py reports one
PASS/FAIL line in the summary, so the acceptance gate is readable at a
glance regardless of capture settings.
"""

from __future__ import annotations

import pytest

from datastation import Station, StationConfig, keys
from datastation.config import UserIdentity
from datastation.policy import AccessPolicy


@pytest.fixture
def keypair():
    return keys.generate_keypair()


@pytest.fixture
def station(tmp_path, keypair):
    priv, pub = keypair
    cfg = StationConfig(store_root=tmp_path / "station", rng_seed=20_240_101, dp_seed=97)
    st = Station(cfg)
    st.add_user(UserIdentity("owner", secret="owner-secret", roles=("contributor", "owner"), key_fingerprint=pub))
    st.add_user(UserIdentity("alice", secret="alice-secret", roles=("user",)))
    st.add_user(UserIdentity("bob", secret="bob-secret", roles=("user",)))
    st._test_private_key = priv  # convenience for signing fixtures
    return st


@pytest.fixture
def owner_key(keypair):
    return keypair[1]


def sign(station: Station, content: bytes) -> str:
    return keys.sign_content(station._test_private_key, content)


def ingest(station: Station, content: bytes, access: str = "open", **policy_kwargs) -> str:
    owner = station.config.users["owner"].key_fingerprint
    return station.ingest_dataset(
        content,
        owner_key=owner,
        signature=sign(station, content),
        default_policy=AccessPolicy(dataset="", access=access, **policy_kwargs),
    )


# -- acceptance reporting ------------------------------------------------------

_acceptance_reports: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in str(report.nodeid):
        return
    _acceptance_reports.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_reports:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_reports:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}")
