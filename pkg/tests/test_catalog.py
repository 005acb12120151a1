"""Catalog profiling, sketches, and constrained queries."""

from __future__ import annotations

import random

import pytest

from datastation import records, sketches
from datastation.catalog import CatalogQuery
from datastation.errors import EmptyText, NotFound
from datastation.policy import GovernancePolicy

from conftest import ingest


def test_small_column_is_counted_exactly(station):
    asset = ingest(station, b"letters\na\nb\nc\nd\n")
    profile = station.catalog.get(asset)
    col = profile.column("letters")
    assert col.distinct_estimate == 4
    assert col.sketch == sketches.sketch_of({"a", "b", "c", "d"})
    assert len(col.sketch) == sketches.SKETCH_K


def test_identical_columns_sketch_identically(station):
    a = ingest(station, b"city\nparis\nlondon\noslo\n")
    b = ingest(station, b"town\nparis\nlondon\noslo\n")
    sk_a = station.catalog.get(a).column("city").sketch
    sk_b = station.catalog.get(b).column("town").sketch
    assert sk_a == sk_b


def test_sketch_jaccard_close_to_exact_third(station):
    a = ingest(station, b"v\na\nb\nc\nd\n")
    b = ingest(station, b"v\nc\nd\ne\nf\n")
    est = sketches.jaccard_estimate(
        station.catalog.get(a).column("v").sketch,
        station.catalog.get(b).column("v").sketch,
    )
    exact = len({"a", "b", "c", "d"} & {"c", "d", "e", "f"}) / len(
        {"a", "b", "c", "d"} | {"c", "d", "e", "f"}
    )
    assert exact == pytest.approx(1 / 3)
    assert abs(est - exact) <= 0.15


def test_text_normalization_trims_and_lowercases(station):
    a = ingest(station, b"city\n PARIS \nLondon\n")
    b = ingest(station, b"city\nparis\nlondon\n")
    assert station.catalog.get(a).column("city").sketch == station.catalog.get(b).column("city").sketch


def test_reprofiling_unchanged_content_is_byte_identical(station):
    asset = ingest(station, b"a,b\n1,x\n2,y\n")
    first = records.dumps(station.catalog.get(asset).to_record())
    station.catalog.profile(asset)
    second = records.dumps(station.catalog.get(asset).to_record())
    assert first == second


def test_number_and_date_ranges(station):
    asset = ingest(station, b"n,d\n3,2020-01-05\n1,2019-12-31\n2,01/15/2021\n")
    profile = station.catalog.get(asset)
    n = profile.column("n")
    assert (n.minimum, n.maximum) == ("1.0", "3.0")
    d = profile.column("d")
    assert (d.minimum, d.maximum) == ("2019-12-31", "2021-01-15")


def test_pii_columns_expose_no_top_values(station):
    station.policy.set_governance(GovernancePolicy(pii_dictionary=frozenset({"ssn"})))
    asset = ingest(station, b"ssn,city\n111,paris\n222,oslo\n")
    station.catalog.profile(asset)
    profile = station.catalog.get(asset)
    assert profile.column("ssn").top_values == []
    assert profile.column("city").top_values != []


def test_top_values_are_frequency_then_lexicographic(station):
    asset = ingest(station, b"v\nb\nb\na\nc\nc\nc\nd\ne\nf\ng\n")
    top = station.catalog.get(asset).column("v").top_values
    assert top == [("c", 3), ("b", 2), ("a", 1), ("d", 1), ("e", 1)]


def test_upsert_why_requires_text(station):
    asset = ingest(station, b"a\n1\n")
    with pytest.raises(EmptyText):
        station.catalog.upsert_why(asset, "   ", "alice")


def test_upsert_why_sets_human_provenance_and_last_write_wins(station):
    asset = ingest(station, b"a\n1\n")
    assert station.catalog.get(asset).why_is_human is False
    station.catalog.upsert_why(asset, "first purpose", "alice")
    station.catalog.upsert_why(asset, "better purpose", "bob")
    why = station.catalog.get(asset).why
    assert why == {"text": "better purpose", "author": "bob", "provenance": "human"}


def test_upsert_why_unknown_asset(station):
    with pytest.raises(NotFound):
        station.catalog.upsert_why("f" * 32, "text", "alice")


def test_query_by_creator(station, owner_key):
    from datastation import keys
    from datastation.policy import AccessPolicy

    a = ingest(station, b"a\n1\n")
    b = ingest(station, b"b\n2\n")
    other_priv, other_pub = keys.generate_keypair()
    content = b"c\n3\n"
    c = station.ingest_dataset(
        content, owner_key=other_pub, signature=keys.sign_content(other_priv, content),
        default_policy=AccessPolicy(dataset="", access="open"),
    )
    hits = station.catalog_search("alice", CatalogQuery(creator_in={owner_key}))
    assert set(hits) == {a, b}
    assert c not in hits


def test_query_requires_why_vacuous_when_none(station):
    ingest(station, b"a\n1\n")
    ingest(station, b"b\n2\n")
    assert station.catalog_search("alice", CatalogQuery(requires_why=True)) == []


def test_query_max_depth_over_chain(station):
    d = ingest(station, b"a\n1\n")
    p1 = station.store.register_derived("table", [d], "op", b"a\n1\n")
    station.catalog.profile(p1.id)
    p2 = station.store.register_derived("table", [p1.id], "op", b"a\n1\n")
    station.catalog.profile(p2.id)
    hits = station.catalog_search("alice", CatalogQuery(max_depth=1))
    assert d in hits and p1.id in hits and p2.id not in hits


def test_query_keyword_matches_column_names_and_why(station):
    a = ingest(station, b"employee_id,salary\n1,100\n")
    b = ingest(station, b"city\nparis\n")
    station.catalog.upsert_why(b, "European capital cities", "alice")
    assert station.catalog_search("alice", CatalogQuery(keyword="salary")) == [a]
    assert station.catalog_search("alice", CatalogQuery(keyword="capital")) == [b]


def test_query_conjunction_is_monotone(station, owner_key):
    for i in range(6):
        asset = ingest(station, f"col{i}\nv{i}\n".encode())
        if i % 2 == 0:
            station.catalog.upsert_why(asset, f"purpose {i}", "alice")
    rng = random.Random(5)
    for _ in range(20):
        base = CatalogQuery(
            creator_in={owner_key} if rng.random() < 0.5 else None,
            requires_why=False,
            max_depth=rng.choice([None, 0, 1]),
        )
        stricter = CatalogQuery(
            creator_in=base.creator_in,
            requires_why=True,
            max_depth=base.max_depth,
            keyword="purpose" if rng.random() < 0.5 else None,
        )
        wide = set(station.catalog_search("alice", base))
        narrow = set(station.catalog_search("alice", stricter))
        assert narrow <= wide


def test_exactly_one_profile_per_live_asset(station):
    a = ingest(station, b"a\n1\n")
    p = station.store.register_derived("table", [a], "op", b"a\n1\n")
    station.catalog.profile(p.id)
    assert set(station.catalog.profiled_ids()) == set(station.store.asset_ids())
    station.store.cascade_delete(a)
    assert station.catalog.profiled_ids() == []
    with pytest.raises(NotFound):
        station.catalog.get(a)


def test_export_import_round_trip(station):
    a = ingest(station, b"a,b\n1,x\n")
    station.catalog.upsert_why(a, "test corpus", "alice")
    exported = station.catalog.export_records()
    record = records.load_lines(exported)[0]
    assert set(record) == {"asset", "what", "who", "how", "where", "when", "why", "ext"}

    fresh_catalog_count = station.catalog.import_records(exported)
    assert fresh_catalog_count == 1
    assert records.dumps(station.catalog.get(a).to_record()) in exported


def test_where_profile_mirrors_policy(station):
    from datastation.policy import AccessPolicy

    a = ingest(station, b"a\n1\n", access="open")
    assert station.catalog.get(a).where["access_mode"] == "open"
    station.policy.register(AccessPolicy(dataset=a, access="brokered"))
    assert station.catalog.get(a).where["access_mode"] == "brokered"
