import pandas as pd
import pytest

from causalpm.aceg import aggregate_level3
from causalpm.analysis import (
    END,
    START,
    CycleTimeStats,
    batching_type_distribution,
    ceg_cycle_stats,
    conformance_score,
    conformance_table,
    end_event_distribution,
    event_type_cycle_stats,
    expected_type_edges,
    flatten_to_event_log,
    fragment_cycle_stats,
    mine_dfg,
    ratio_percent,
    temporal_violations,
    violation_counts,
)
from causalpm.ceg import CausalEventDatabase, case_projection, fragments

from . import oracles as O
from .conftest import POI, RCP, RPO, RS

MIN = 60 * 1_000_000


def tiny_db(times, edges, labels=("A", "B", "C")):
    """Chain-shaped database a -> b -> c over explicitly given timestamps."""
    rels = ["a", "b", "c"][: len(times)]
    ids = [f"{r}:1" for r in rels]
    tuples = [list(range(len(rels)))]
    src = [s for s, _ in edges]
    dst = [d for _, d in edges]
    return CausalEventDatabase(rels, dict(zip(rels, labels)), "a", ids, list(range(len(rels))), ["1"] * len(rels),
                               times, src, dst, tuples, [(rels[s], rels[d]) for s, d in edges])


def test_stats_arithmetic():
    assert CycleTimeStats.of([60, 20]) == CycleTimeStats(20, 40.0, 60, 2)
    assert CycleTimeStats.of([7]) == CycleTimeStats(7, 7.0, 7, 1)
    assert CycleTimeStats.of([]) == CycleTimeStats(None, None, None, 0)


def test_event_type_cycle_stats(shop_views):
    s = event_type_cycle_stats(shop_views, POI)
    # pi1..pi5 come 60, 70, 80, 70, 60 minutes after their order
    assert (s.min, s.max, s.count) == (60 * MIN, 80 * MIN, 5)
    assert s.avg == pytest.approx(68 * MIN)
    assert event_type_cycle_stats(shop_views, "Missing").count == 0


def test_start_events_can_be_excluded(shop_views):
    assert event_type_cycle_stats(shop_views, RPO).count == 3
    assert event_type_cycle_stats(shop_views, RPO, include_start=False).count == 0


def test_ceg_and_fragment_spans(shop_views, shop_db):
    assert ceg_cycle_stats(shop_views) == CycleTimeStats.of([5 * 60 * MIN, 270 * MIN, 2 * 60 * MIN])
    spans = [max(shop_db.timestamps[f.events]) - min(shop_db.timestamps[f.events]) for f in fragments(shop_db)]
    assert fragment_cycle_stats(shop_db) == CycleTimeStats.of(spans)
    db = tiny_db([100, 160, 300], [(0, 1), (1, 2)])
    assert ceg_cycle_stats(case_projection(db)).max == 200
    single = tiny_db([5], [])
    assert ceg_cycle_stats(case_projection(single)).max == 0


def test_end_event_distribution(shop_views):
    dist = end_event_distribution(aggregate_level3(shop_views))
    assert dist == {RS: (2, pytest.approx(2 / 3)), RCP: (1, pytest.approx(1 / 3))}
    linear = aggregate_level3(case_projection(tiny_db([1, 2, 3], [(0, 1), (1, 2)])))
    assert end_event_distribution(linear) == {"C": (1, 1.0)}


def test_batching_distribution(shop_db):
    assert batching_type_distribution(shop_db) == {RS: (1, 1.0)}
    assert batching_type_distribution(tiny_db([1, 2], [(0, 1)])) == {}


def test_temporal_violations():
    ok = tiny_db([100, 160, 160], [(0, 1), (1, 2)])
    assert temporal_violations(ok) == []
    bad = tiny_db([100, 500, 400], [(0, 1), (1, 2)])
    (v,) = temporal_violations(bad)
    assert (v.cause, v.effect, v.cause_timestamp, v.effect_timestamp) == ("b:1", "c:1", 500, 400)
    assert violation_counts(bad) == {("B", "C"): 1}


def test_shop_has_no_violations(shop_db):
    assert temporal_violations(shop_db) == []


def test_flatten(shop_db):
    log = flatten_to_event_log(shop_db)
    assert len(log) == 12
    assert (log["event_id"] == "shipments:sh2").sum() == 2
    assert list(log.columns) == ["case_id", "activity", "timestamp", "event_id"]
    assert len(flatten_to_event_log(shop_db, "shipments")) == 9


def test_flatten_empty():
    db = CausalEventDatabase(["a"], {"a": "A"}, "a", [], [], [], [], [], [], [])
    assert len(flatten_to_event_log(db)) == 0
    assert mine_dfg(flatten_to_event_log(db)).counts == {}


def test_dfg_spurious_relations_from_interleaving():
    log = pd.DataFrame({"case_id": ["c"] * 7, "activity": list("abcbbcc"), "timestamp": range(7)})
    counts = mine_dfg(log).counts
    assert counts[("b", "b")] == 1 and counts[("c", "b")] == 1 and counts[("c", "c")] == 1
    assert counts[(START, "a")] == 1 and counts[("c", END)] == 1


def test_dfg_single_event_case():
    log = pd.DataFrame({"case_id": ["c"], "activity": ["x"], "timestamp": [0]})
    assert mine_dfg(log).counts == {(START, "x"): 1, ("x", END): 1}


def test_dfg_shop_self_loop(shop_db):
    dfg = mine_dfg(flatten_to_event_log(shop_db))
    assert dfg.counts[(POI, POI)] >= 1
    rows = O.naive_log(
        {v.key: O.Graph(set(v.event_ids), v.edge_ids(), {e: shop_db.type_of(e) for e in v.event_ids},
                        {e: shop_db.event(e).timestamp for e in v.event_ids}) for v in case_projection(shop_db)}
    )
    assert dfg.counts == O.naive_dfg(rows)


def test_ratio_example():
    assert round(ratio_percent(69_438, 561), 2) == 0.81
    table = conformance_table({("a", "b"): 69_438, ("a", END): 561}, {("a", "b")})
    (edge,) = table.edges()
    assert edge[:4] == ("a", "b", 69_438, 561) and round(edge[4], 2) == 0.81


def test_conforming_graph_scores_zero(shop_views, shop_cpt, shop_db):
    level3 = aggregate_level3(shop_views)
    expected = expected_type_edges(shop_cpt, shop_db.labels)
    table = conformance_table(level3, expected, violation_counts(shop_db))
    assert table.score == 0
    assert all(r == 0 for *_, r in table.edges())


def test_dfg_score_is_sum_of_unexpected():
    assert conformance_score({("a", "b"): 5, ("b", "a"): 7, ("a", "c"): 3}, {("a", "c")}) == 12


def test_violations_on_expected_edges_add_to_score():
    q = {("a", "b"): 10, ("b", "c"): 4}
    assert conformance_score(q, {("a", "b"), ("b", "c")}, {("a", "b"): 2}) == 2
    # a violating unexpected edge already counts in full
    assert conformance_score(q, {("a", "b")}, {("b", "c"): 4}) == 4


def test_unexpected_edge_adds_its_quantity(shop_views, shop_cpt, shop_db):
    level3 = aggregate_level3(shop_views)
    expected = expected_type_edges(shop_cpt, shop_db.labels)
    q = dict(level3.edge_quantity)
    base = conformance_score(q, expected)
    q[(RS, POI)] = 9
    assert conformance_score(q, expected) == base + 9
    assert conformance_table(q, expected).rows[RS].unexpected == {POI: 9}


def test_expected_edges_include_terminals(shop_cpt, shop_db):
    exp = expected_type_edges(shop_cpt, shop_db.labels)
    assert (START, RPO) in exp and (RS, END) in exp and (RCP, END) in exp and (RPO, END) not in exp


def test_label_map():
    table = conformance_table({("x", "y"): 3}, {("a", "b")}, label_map={"x": "a", "y": "b"})
    assert table.score == 0


def test_csv_grid(shop_db, shop_cpt):
    dfg = mine_dfg(flatten_to_event_log(shop_db))
    frame = conformance_table(dfg, expected_type_edges(shop_cpt, shop_db.labels)).to_frame()
    assert frame.columns[0] == "source" and frame.columns[-1] == "Total"
    row = frame.set_index("source").loc[POI]
    assert row[POI] == "2 / 0"
