"""Config file parsing and validation."""

from __future__ import annotations

from pathlib import Path

import pytest

from datastation.config import DEFAULT_PII_NAMES, StationConfig, load_config
from datastation.errors import StationError

EXAMPLE = Path(__file__).resolve().parent.parent / "docs" / "station.conf.example"


def test_example_config_parses():
    cfg = load_config(EXAMPLE)
    assert cfg.weight_coverage == 0.4
    assert cfg.max_candidates == 25
    assert cfg.price_disambiguation == 30
    assert cfg.users["owner"].roles == ("contributor", "owner")
    assert cfg.users["alice"].secret == "alice-secret"


def test_unknown_key_is_rejected(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("not_a_key = 1\n")
    with pytest.raises(StationError):
        load_config(path)


def test_user_lines_build_identities(tmp_path):
    path = tmp_path / "u.conf"
    path.write_text("user.ana.secret = s\nuser.ana.roles = contributor\nuser.ana.key = ab\n")
    cfg = load_config(path)
    assert cfg.users["ana"].key_fingerprint == "ab"
    assert cfg.users["ana"].has_role("contributor")


def test_weight_out_of_range_rejected():
    with pytest.raises(StationError):
        StationConfig(weight_keyword=1.5)


def test_default_pii_list_has_twelve_names():
    assert len(DEFAULT_PII_NAMES) == 12
    assert "ssn" in DEFAULT_PII_NAMES


def test_custom_pii_dictionary(tmp_path):
    pii = tmp_path / "pii.txt"
    pii.write_text("# comment\nBadge_Number\n\nssn\n")
    cfg = StationConfig(store_root=tmp_path / "s", pii_dictionary_path=pii)
    assert cfg.pii_names() == frozenset({"badge_number", "ssn"})


def test_station_secret_created_once(tmp_path):
    cfg = StationConfig(store_root=tmp_path / "s")
    first = cfg.station_secret()
    assert len(first) == 32
    assert cfg.station_secret() == first
