import json
import logging

import pytest

from causalpm.catalog import catalog_from_config
from causalpm.cpt import CausalProcessTemplate, default_cpt, parse_cpt, require_valid, transitive_reduction, validate_cpt
from causalpm.errors import ConfigError, ValidationError

PO, OI, SH, CU = "purchase_orders", "order_items", "shipments", "customer_pickups"


def doc(*edges, relations=(PO, OI, SH, CU)):
    return {"relations": list(relations), "edges": [{"from": a, "to": b} for a, b in edges]}


def test_shop_template(shop_cpt):
    assert shop_cpt.edges == {(PO, OI), (OI, SH), (OI, CU)}
    assert shop_cpt.is_partial_order()
    assert shop_cpt.sources() == [PO]
    assert sorted(shop_cpt.sinks()) == [CU, SH]
    assert shop_cpt.topological_order()[0] == PO


def test_validate_shop(shop_loaded, shop_cpt):
    assert not validate_cpt(shop_cpt, shop_loaded[0])


def test_cycle_reported_with_members(shop_loaded):
    cpt = parse_cpt(doc((PO, OI), (OI, SH), (SH, PO)))
    report = validate_cpt(cpt, shop_loaded[0])
    assert "cycle" in report.codes
    with pytest.raises(ValidationError, match="order_items"):
        require_valid(cpt, shop_loaded[0])
    with pytest.raises(ValidationError):
        cpt.topological_order()
    assert cpt.find_cycle() == [OI, SH, PO]


def test_transitive_edge_removed_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        cpt = parse_cpt(doc((PO, OI), (OI, SH), (PO, SH)))
    assert (PO, SH) not in cpt.edges and cpt.removed == {(PO, SH)}
    assert "transitivity" in caplog.text
    assert (PO, SH) in cpt.closure()


def test_use_closure_restores_implied_pairs():
    cpt = parse_cpt(doc((PO, OI), (OI, SH)), use_closure=True)
    assert cpt.causal_pairs() == {(PO, OI), (OI, SH), (PO, SH)}


def test_transitive_reduction_of_chain():
    kept, dropped = transitive_reduction("abc", {("a", "b"), ("b", "c"), ("a", "c")})
    assert kept == {("a", "b"), ("b", "c")} and dropped == {("a", "c")}


def test_unbacked_edge_is_warning(shop_loaded):
    cpt = parse_cpt(doc((PO, OI), (SH, CU)))
    report = validate_cpt(cpt, shop_loaded[0])
    assert report.ok
    assert any("shipments -> customer_pickups not backed by foreign key" in i.message for i in report.warnings)


def test_parse_errors(tmp_path):
    with pytest.raises(ConfigError, match=r"edges\[0\]"):
        parse_cpt(doc((PO, "ghost")))
    with pytest.raises(ConfigError, match="self-edge"):
        parse_cpt(doc((PO, PO)))
    with pytest.raises(ConfigError, match="line 1"):
        parse_cpt('{"relations": [}')
    with pytest.raises(ConfigError, match="not found"):
        parse_cpt(tmp_path / "none.json")
    with pytest.raises(ConfigError, match="relations"):
        parse_cpt({"edges": []})


def test_parse_from_json_string_and_list_edges():
    cpt = parse_cpt(json.dumps({"cpt": {"relations": ["a", "b"], "edges": [["a", "b"]]}}))
    assert cpt.edges == {("a", "b")}


def test_unknown_relation_against_catalog(shop_loaded):
    with pytest.raises(ConfigError, match="ghost"):
        parse_cpt(doc(relations=(PO, "ghost")), shop_loaded[0])


def test_default_template_points_away_from_root(shop_loaded):
    cpt = default_cpt(shop_loaded[0], root=PO)
    assert cpt.edges == {(PO, OI), (OI, SH), (OI, CU)}


def test_to_dict_roundtrip(shop_cpt):
    assert parse_cpt(shop_cpt.to_dict()) == shop_cpt


def test_disconnected_relation_warned():
    cat = catalog_from_config({"tables": {"a": {"pk": "id", "timestamp": "t"}, "b": {"pk": "id", "timestamp": "t"}}})
    cpt = CausalProcessTemplate(("a", "b"), frozenset())
    assert "disconnected" in validate_cpt(cpt, cat).codes
