"""
Purchase orders, items, shipments
=================================

Four small tables (3 orders, 5 items, 2 shipments, 1 pickup) and a causal
template order -> item -> {shipment, pickup}. One shipment serves two
orders, which is exactly what a flat event log cannot represent.
"""
from pathlib import Path

from causalpm import aggregate_level1, aggregate_level2, aggregate_level3, case_projection
from causalpm.cli import build_database
from causalpm.config import load_run_config
from causalpm.export import aceg_edge_label, aceg_to_dot

CONFIG = Path(__file__).resolve().parents[1] / "tests" / "data" / "shop" / "config.json"

db, cpt, report = build_database(load_run_config(CONFIG))
print(db)
print("template edges:", sorted(cpt.edges))

# one graph per order: the union of all joined rows carrying that order key
views = case_projection(db)
for v in views:
    print(f"\n{v.key}: {v.n_events} events")
    for a, b in sorted(v.edge_ids()):
        print(f"  {a} -> {b}")

# sh2 sits in two projections: a batching event
print("\nsh2 appears in", [v.key for v in views if "shipments:sh2" in v.event_ids])

# level 1: one type-level summary per order
a1 = aggregate_level1(views.by_key("purchase_orders:or1"))
print("\nlevel 1, or1")
for edge in a1.edges:
    # in-card : out-card (quantity)
    print(f"  {edge[0]} -> {edge[1]}: {aceg_edge_label(a1, edge)}")

# level 2 groups orders with the same shape
for a in aggregate_level2(views):
    print("\nlevel 2 group", a.sources, a.node_quantity)

# level 3: everything in one picture
a3 = aggregate_level3(views)
print("\nlevel 3")
for edge in a3.edges:
    print(f"  {edge[0]} -> {edge[1]}: {aceg_edge_label(a3, edge)}")
print("\n" + aceg_to_dot(a3, terminals=True))
