import io
import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cliquescout.graph import Graph
from cliquescout.kdgraph import ConfigurationError, KDParams, WeightMode, build_kd_graph, kd_parameter_sweep
from cliquescout.report import (
    CLIQUE,
    QUASICLIQUE,
    CountTable,
    LabelFile,
    LabelFileError,
    annotate,
    build_count_table,
    count_table_from_graphs,
    export_group_graph,
    flag_groups,
    group_graph,
    read_jsonl,
    sweep_violations,
    table_violations,
    validate_groups,
    write_jsonl,
)
from cliquescout.store import ReviewStore
from cliquescout.synth import SynthConfig, generate

from helpers import complete_graph


@pytest.fixture(scope="module")
def planted10():
    return generate(
        SynthConfig(seed=10, n_users=600, n_venues=120, background_rate=3, span_days=365, planted=((10, 6, 5),))
    )


def test_table_counts_planted_ten_group(planted10):
    store, _ = planted10
    table = build_count_table(store, [5, 6], [5], [9, 10, 11], CLIQUE)
    assert table.exact[(6, 5, 10)] >= 1
    assert table.exact[(6, 5, 11)] == 0
    assert table.at_least[(6, 5, 9)] >= table.exact[(6, 5, 10)]
    assert set(table.exact) == {(k, 5, s) for k in (5, 6) for s in (9, 10, 11)}


def test_empty_store_table_is_all_zero():
    table = build_count_table(ReviewStore.empty(), [3, 4], [5, 6], [9, 10, 11])
    assert len(table.exact) == 12 and not any(table.exact.values()) and not any(table.at_least.values())


def test_quasiclique_table_and_rendering(planted10):
    store, _ = planted10
    table = build_count_table(store, [6], [5, 8], [7, 8, 9, 10], QUASICLIQUE, theta="0.9")
    assert table.theta == Fraction(9, 10)
    assert table.at_least[(6, 5, 10)] >= 1
    text = table.render()
    assert "10-quasiclique" in text and "6,8" in text and "theta = 9/10" in text


def test_csv_shape_and_round_trip(planted10):
    store, _ = planted10
    table = build_count_table(store, [4, 6], [5, 6], [9, 10, 11])
    lines = table.to_csv().splitlines()
    assert lines[0] == "k,d,size,count" and len(lines) == 1 + 4 * 3
    assert table.cumulative_csv().splitlines()[0] == "k,d,min_size,count"
    assert CountTable.from_csv(table.to_csv(), table.cumulative_csv()) == table


@settings(max_examples=50)
@given(
    st.lists(st.tuples(st.integers(1, 9), st.integers(0, 9)), min_size=1, max_size=4, unique=True),
    st.lists(st.integers(2, 14), min_size=1, max_size=4, unique=True),
    st.data(),
)
def test_csv_round_trip_property(params, sizes, data):
    cells = [(k, d, s) for k, d in params for s in sizes]
    exact = {c: data.draw(st.integers(0, 10**6)) for c in cells}
    at_least = {c: data.draw(st.integers(0, 10**6)) for c in cells}
    table = CountTable(CLIQUE, params, sizes, exact, at_least)
    assert CountTable.from_csv(table.to_csv(), table.cumulative_csv()) == table


def test_count_table_parallel_matches_sequential():
    store, _ = generate(SynthConfig(seed=2, n_users=300, n_venues=40, background_rate=5, span_days=60, planted=((6, 4, 2),)))
    graphs = kd_parameter_sweep(store, [2, 3], [2, 4])
    assert count_table_from_graphs(graphs, [3, 4, 5, 6], workers=2) == count_table_from_graphs(graphs, [3, 4, 5, 6])


def test_maximal_clique_counts_are_not_monotone_in_edges():
    # two maximal 4-cliques sharing three vertices merge into one 5-clique once the last edge appears
    base = [e for e in itertools.combinations(range(5), 2) if e != (3, 4)]
    sparse, dense = Graph.from_edges(5, base), complete_graph(5)
    sparse.users = dense.users = np.arange(5)
    table = count_table_from_graphs({(1, 5): sparse, (1, 6): dense}, [4])
    assert table.at_least[(1, 5, 4)] == 2 and table.at_least[(1, 6, 4)] == 1
    assert table_violations(table) == []
    assert sweep_violations({(1, 5): sparse, (1, 6): dense}, 5) == []


def test_sweep_and_table_checks_on_synthetic_grid(planted10):
    store, _ = planted10
    graphs = kd_parameter_sweep(store, [3, 4, 5, 6], [5, 6, 8])
    assert sweep_violations(graphs, store.n_users) == []
    assert table_violations(count_table_from_graphs(graphs, [3, 9, 10, 11])) == []


def test_violations_are_reported():
    small, big = complete_graph(3), complete_graph(4)
    small.users, big.users = np.arange(3), np.arange(4)
    problems = sweep_violations({(1, 5): big, (1, 6): small}, 4)
    assert problems == ["E(1,5) is not a subset of E(1,6)"]
    table = count_table_from_graphs({(1, 5): big, (1, 6): small}, [4])
    assert table_violations(table)


# -- flag / validate ---------------------------------------------------------------


def test_flag_planted_11_group():
    store, groups = generate(SynthConfig(seed=7, n_users=400, n_venues=80, background_rate=2, planted=((11, 6, 5),)))
    records = flag_groups(store, KDParams(6, 5), CLIQUE, min_size=9)
    assert len(records) == 1
    rec = records[0]
    assert rec["members"] == sorted(groups[0].members)
    assert len(rec["pairs"]) == 55 and all(p["count"] >= 6 for p in rec["pairs"])
    assert rec["density"] == "1"
    assert validate_groups(store, records) == []


def test_flag_without_groups_is_empty():
    store, _ = generate(SynthConfig(seed=1, n_users=100, n_venues=50, background_rate=1))
    assert flag_groups(store, KDParams(6, 5), CLIQUE, min_size=9) == []


def test_flag_two_planted_triangles():
    store, groups = generate(SynthConfig(seed=5, n_users=300, n_venues=200, planted=((3, 4, 2), (3, 4, 2))))
    records = flag_groups(store, KDParams(4, 2), CLIQUE, min_size=3)
    assert sorted(r["members"] for r in records) == sorted(sorted(g.members) for g in groups)
    assert validate_groups(store, records) == []


def test_flag_quasicliques_and_validate(planted10):
    store, _ = planted10
    records = flag_groups(store, KDParams(6, 5), QUASICLIQUE, min_size=9, theta=Fraction(9, 10))
    assert records and all(r["kind"] == QUASICLIQUE and r["theta"] == "9/10" for r in records)
    assert validate_groups(store, records) == []


def test_evidence_cap_and_full_flag():
    store, _ = generate(SynthConfig(seed=8, n_users=50, n_venues=80, planted=((3, 60, 1),)))
    capped = flag_groups(store, KDParams(55, 1), CLIQUE, min_size=3)
    full = flag_groups(store, KDParams(55, 1), CLIQUE, min_size=3, full_evidence=True)
    assert all(len(p["venues"]) == 50 and p["truncated"] for p in capped[0]["pairs"])
    assert all(len(p["venues"]) == p["count"] == 60 for p in full[0]["pairs"])
    assert validate_groups(store, capped) == [] and validate_groups(store, full) == []


def test_validator_catches_tampering():
    store, _ = generate(SynthConfig(seed=7, n_users=400, n_venues=80, background_rate=2, planted=((11, 6, 5),)))
    records = flag_groups(store, KDParams(6, 5), CLIQUE, min_size=9)
    bad = read_jsonl(io.StringIO("".join(_jsonl(records))))
    bad[0]["pairs"][0]["venues"][0]["date_v"] = "1999-01-01"
    bad[0]["pairs"].pop()
    problems = validate_groups(store, bad)
    assert any("no such reviews" in p for p in problems)
    assert any("54 of 55" in p for p in problems)


def _jsonl(records):
    buf = io.StringIO()
    write_jsonl(records, buf)
    return buf.getvalue()


# -- annotate -----------------------------------------------------------------------


GROUPS = [{"members": ["a", "b", "c"], "k": 1, "d": 1}, {"members": ["c", "d"], "k": 1, "d": 1}]


def test_all_flagged_labelled_scout():
    labels = LabelFile({m: "scout" for m in "abcd"})
    stats = annotate(GROUPS, labels)
    assert stats.fraction("scout") == 1.0 and stats.flagged_users == 4


def test_empty_label_file(tmp_path):
    path = tmp_path / "labels.tsv"
    path.write_text("")
    store, _ = generate(SynthConfig(seed=1, n_users=10, n_venues=5, background_rate=1))
    stats = annotate(GROUPS, LabelFile.read(path), store=store)
    assert stats.fraction("scout") == 0.0 and stats.unknown_label_users == 0


def test_fraction_over_flagged_and_graph_populations():
    labels = LabelFile.parse(["# comment", "a\tscout", "d\tscout", "x\tscout", "b,elite"])
    stats = annotate(GROUPS, labels, graph_users=["a", "b", "c", "d", "e", "f", "g", "x"])
    assert stats.fractions == {"elite": 0.25, "scout": 0.5}
    assert stats.graph_fractions == {"elite": 1 / 8, "scout": 3 / 8}
    assert stats.groups[0] == {"members": 3, "labels": {"elite": 1, "scout": 1}, "unlabelled": 1}


def test_unknown_labelled_users_are_counted():
    store, groups = generate(SynthConfig(seed=7, n_users=400, n_venues=80, background_rate=2, planted=((11, 6, 5),)))
    records = flag_groups(store, KDParams(6, 5), CLIQUE, min_size=9)
    planted = groups[0].members
    labels = LabelFile({**{m: "scout" for m in planted}, "ghost": "scout"})
    stats = annotate(records, labels, store=store)
    assert stats.unknown_label_users == 1
    flagged = {m for r in records for m in r["members"]}
    assert stats.fraction("scout") == len(set(planted) & flagged) / len(flagged) == 1.0


def test_label_file_errors(tmp_path):
    with pytest.raises(LabelFileError):
        LabelFile.read(tmp_path / "missing.tsv")
    with pytest.raises(LabelFileError):
        LabelFile.parse(["a\tscout", "a\telite"])
    with pytest.raises(LabelFileError):
        LabelFile.parse(["a\tb\tc"])


# -- export -------------------------------------------------------------------------


def test_export_single_triangle_dot():
    store, _ = generate(SynthConfig(seed=5, n_users=30, n_venues=20, planted=((3, 4, 2),)))
    records = flag_groups(store, KDParams(4, 2), CLIQUE, min_size=3)
    buf = io.StringIO()
    g = export_group_graph(store, records, buf, WeightMode.CO_REVIEW_COUNT, "dot", LabelFile({records[0]["members"][0]: "scout"}))
    text = buf.getvalue()
    assert g.n == 3 and g.n_edges == 3
    assert text.count(" -- ") == 3
    assert 'reviews="4"' in text and 'user_label="scout"' in text


def test_export_empty_group_list():
    for fmt in ("dot", "tsv"):
        buf = io.StringIO()
        g = export_group_graph(ReviewStore.empty(), [], buf, fmt=fmt)
        assert g.n == 0
    assert buf.getvalue() == ""
    dot = io.StringIO()
    export_group_graph(ReviewStore.empty(), [], dot)
    assert dot.getvalue() == 'graph "G" {\n}\n'


def test_export_friend_intersection_weights_match_set_oracle():
    store, groups = generate(
        SynthConfig(seed=7, n_users=300, n_venues=80, background_rate=2, planted=((11, 6, 5),), mean_friends=40)
    )
    records = flag_groups(store, KDParams(6, 5), CLIQUE, min_size=11)
    buf = io.StringIO()
    g = export_group_graph(store, records, buf, WeightMode.FRIEND_INTERSECTION, "tsv")
    idx = store.user_index()
    friends = {m: {store.user_ids[f] for f in store.friends_of(idx[m]).tolist()} for m in groups[0].members}
    rows = [line.split("\t") for line in buf.getvalue().splitlines()]
    assert len(rows) == 55 == g.n_edges
    for a, b, w in rows:
        assert int(w) == len(friends[a] & friends[b])
    assert any(int(w) > 0 for *_, w in rows)


def test_export_friend_mode_needs_friends(planted10):
    store, _ = planted10
    with pytest.raises(ConfigurationError):
        group_graph(store, [{"members": [store.user_ids[0]], "k": 1, "d": 1}], WeightMode.FRIEND_INTERSECTION)


def test_group_graph_is_union_of_induced_subgraphs(planted10):
    store, _ = planted10
    g = build_kd_graph(store, KDParams(6, 5))
    records = flag_groups(store, KDParams(6, 5), QUASICLIQUE, min_size=9, graph=g)
    union = group_graph(store, records)
    names = {n: i for i, n in enumerate(g.labels)}
    for u, v, _ in union.edges():
        assert g.has_edge(names[union.labels[u]], names[union.labels[v]])
