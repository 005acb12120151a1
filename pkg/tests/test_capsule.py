"""Capsule parsing, fingerprints, and trust checks."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datastation import capsule, records
from datastation.capsule import TrustConstraints, check_trust
from datastation.errors import (
    DosMismatch,
    MalformedDocument,
    PayloadMismatch,
    UnknownTaskType,
)

from conftest import ingest

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "docs" / "capsules"


def _doc(**overrides) -> str:
    base = {
        "task_type": "classify",
        "payload": {
            "n_classes": 2,
            "label_column": "label",
            "model_class": "nearest_centroid",
            "test_data": "x,label\n1,A\n2,B\n",
        },
        "dos": {"metric": "accuracy", "threshold": 0.8},
        "trust": {},
    }
    base.update(overrides)
    return records.dumps(base)


@pytest.mark.parametrize("name", ["classify.json", "qbe.json", "search.json"])
def test_golden_documents_parse(name):
    parsed = capsule.parse((GOLDEN_DIR / name).read_bytes(), submitter="alice")
    assert parsed.task_type == name.split(".")[0]
    assert parsed.submitter == "alice"


def test_classify_threshold_parsed():
    parsed = capsule.parse(_doc())
    assert parsed.dos.metric == "accuracy"
    assert parsed.dos.threshold == 0.8


def test_search_with_accuracy_metric_is_dos_mismatch():
    doc = _doc(
        task_type="search",
        payload={"keywords": ["x"]},
        dos={"metric": "accuracy", "threshold": 0.8},
    )
    with pytest.raises(DosMismatch):
        capsule.parse(doc)


def test_qbe_row_arity_mismatch():
    doc = _doc(
        task_type="qbe",
        payload={"attributes": ["a", "b", "c"], "example_rows": [["1", "2"]]},
        dos={"metric": "coverage", "threshold": 0.5},
    )
    with pytest.raises(PayloadMismatch):
        capsule.parse(doc)


def test_unknown_task_type():
    with pytest.raises(UnknownTaskType):
        capsule.parse(_doc(task_type="regress"))


def test_missing_fields_lists_them():
    with pytest.raises(MalformedDocument) as err:
        capsule.parse(records.dumps({"task_type": "search"}))
    assert "payload" in str(err.value) and "dos" in str(err.value)


def test_payload_errors_collect_every_violation():
    doc = _doc(
        payload={"n_classes": 1, "label_column": "", "model_class": "", "test_data": ""}
    )
    with pytest.raises(PayloadMismatch) as err:
        capsule.parse(doc)
    assert len(err.value.violations) >= 4


def test_classify_labels_bounded_by_n_classes():
    doc = _doc(
        payload={
            "n_classes": 2,
            "label_column": "label",
            "model_class": "nearest_centroid",
            "test_data": "x,label\n1,A\n2,B\n3,C\n",
        }
    )
    with pytest.raises(PayloadMismatch):
        capsule.parse(doc)


def test_fingerprint_independent_of_field_order():
    a = '{"task_type":"search","payload":{"keywords":["x"]},"dos":{"metric":"hits","threshold":2},"trust":{}}'
    b = '{"trust":{},"dos":{"threshold":2,"metric":"hits"},"payload":{"keywords":["x"]},"task_type":"search"}'
    fp_a = capsule.fingerprint(capsule.parse(a))
    fp_b = capsule.fingerprint(capsule.parse(b))
    assert fp_a == fp_b
    assert len(fp_a) == 64


def test_fingerprint_sensitive_to_threshold():
    low = capsule.parse(_doc(dos={"metric": "accuracy", "threshold": 0.8}))
    high = capsule.parse(_doc(dos={"metric": "accuracy", "threshold": 0.9}))
    assert capsule.fingerprint(low) != capsule.fingerprint(high)


def test_fingerprint_ignores_submitter():
    a = capsule.parse(_doc(), submitter="alice")
    b = capsule.parse(_doc(), submitter="bob")
    assert capsule.fingerprint(a) == capsule.fingerprint(b)


def test_parse_serialize_round_trip():
    parsed = capsule.parse(_doc(), submitter="alice")
    again = capsule.parse(capsule.serialize(parsed), submitter="alice")
    assert again == parsed


# -- trust --------------------------------------------------------------------------


def test_trust_creator_allow_on_original(station, owner_key):
    asset = ingest(station, b"a\n1\n")
    ok = TrustConstraints(creators_allow=frozenset({owner_key}))
    bad = TrustConstraints(creators_allow=frozenset({"deadbeef"}))
    assert check_trust(ok, asset, station.catalog, station.store) is True
    assert check_trust(bad, asset, station.catalog, station.store) is False


def test_trust_requires_why(station):
    asset = ingest(station, b"a\n1\n")
    constraint = TrustConstraints(require_why_profile=True)
    assert check_trust(constraint, asset, station.catalog, station.store) is False
    station.catalog.upsert_why(asset, "documented", "alice")
    assert check_trust(constraint, asset, station.catalog, station.store) is True


def test_trust_checks_full_ancestor_closure(station, owner_key):
    from datastation import keys
    from datastation.policy import AccessPolicy

    mine = ingest(station, b"a\n1\n")
    other_priv, other_pub = keys.generate_keypair()
    content = b"b\n2\n"
    theirs = station.ingest_dataset(
        content, owner_key=other_pub, signature=keys.sign_content(other_priv, content),
        default_policy=AccessPolicy(dataset="", access="open"),
    )
    product = station.store.register_derived("table", [mine, theirs], "op", b"a\n1\n")
    station.catalog.profile(product.id)

    only_mine = TrustConstraints(creators_allow=frozenset({owner_key}))
    # oracle: evaluate the constraint on every original node of the closure
    closure = {product.id} | station.store.ancestors(product.id)
    originals = [n for n in closure if station.store.get(n).is_original]
    expected = all(
        station.catalog.get(n).who["producer"] in {owner_key} for n in originals
    )
    assert expected is False
    assert check_trust(only_mine, product.id, station.catalog, station.store) is expected


def test_trust_depth_constraint(station):
    d = ingest(station, b"a\n1\n")
    p1 = station.store.register_derived("table", [d], "op", b"a\n1\n")
    station.catalog.profile(p1.id)
    shallow = TrustConstraints(max_provenance_depth=0)
    assert check_trust(shallow, d, station.catalog, station.store) is True
    assert check_trust(shallow, p1.id, station.catalog, station.store) is False


def test_empty_constraints_trust_everything(station):
    asset = ingest(station, b"a\n1\n")
    assert TrustConstraints().empty
    assert check_trust(TrustConstraints(), asset, station.catalog, station.store) is True


@settings(max_examples=60, deadline=None)
@given(
    base_why=st.booleans(),
    add_creator=st.booleans(),
    add_after=st.booleans(),
    add_why=st.booleans(),
    add_depth=st.booleans(),
)
def test_trust_is_antitone_in_constraints(
    station_factory, base_why, add_creator, add_after, add_why, add_depth
):
    station, asset, owner_key = station_factory
    if base_why:
        base = TrustConstraints()
    else:
        base = TrustConstraints(creators_allow=frozenset({owner_key}))
    stricter = TrustConstraints(
        creators_allow=frozenset({owner_key}) if (add_creator or base.creators_allow) else None,
        created_after=9e12 if add_after else None,
        require_why_profile=add_why,
        max_provenance_depth=0 if add_depth else None,
    )
    before = check_trust(base, asset, station.catalog, station.store)
    after = check_trust(stricter, asset, station.catalog, station.store)
    if not before:
        assert not after or stricter == base
    # adding constraints can only turn true into false, never the reverse
    if after and stricter != base:
        assert before


@pytest.fixture(scope="module")
def station_factory(tmp_path_factory):
    from datastation import Station, StationConfig, keys
    from datastation.config import UserIdentity
    from datastation.policy import AccessPolicy

    priv, pub = keys.generate_keypair()
    st_obj = Station(StationConfig(store_root=tmp_path_factory.mktemp("trust") / "s", rng_seed=5))
    st_obj.add_user(UserIdentity("owner", secret="s", roles=("contributor",), key_fingerprint=pub))
    content = b"a\n1\n"
    asset = st_obj.ingest_dataset(
        content, pub, keys.sign_content(priv, content), AccessPolicy(dataset="", access="open")
    )
    return st_obj, asset, pub
