"""Synthetic order-to-cash data with 1:N fan-out, batched deliveries and back-dated events.

Each order is split into items; every item gets a delivery preparation, a
picking plan and a pick. Items of an order are extracted first and then
processed one after the other, so a flattened per-order log interleaves
them (self-loops, Pick -> Prepare back-jumps). Picks end either in a
customer pickup or in a delivery note, which may be shared across orders
(batching) and is followed by a delivery, an invoice and optionally a group
delivery note.

Anomalies back-date a delivery preparation to after its picking plan. A
preparation has exactly one plan, so each injection yields exactly one
temporal violation.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError

SECOND = 1_000_000
MINUTE = 60 * SECOND
HOUR = 60 * MINUTE

TABLES = {
    # name: (pk, timestamp column, label, [(fk column, referenced table)])
    "orders": ("order_id", "created_at", "Receive Order", []),
    "order_items": ("item_id", "created_at", "Extract Order Item", [("order_id", "orders")]),
    "delivery_preparations": ("prep_id", "created_at", "Prepare Order Delivery", [("item_id", "order_items")]),
    "picking_plans": ("plan_id", "created_at", "Plan Order Item Picking", [("prep_id", "delivery_preparations")]),
    "picks": ("pick_id", "created_at", "Pick Order Item",
              [("plan_id", "picking_plans"), ("note_id", "delivery_notes"), ("pickup_id", "customer_pickups")]),
    "customer_pickups": ("pickup_id", "created_at", "Register Customer Pickup", []),
    "delivery_notes": ("note_id", "created_at", "Create Delivery Note", []),
    "group_delivery_notes": ("group_id", "created_at", "Generate Group Delivery Note", [("note_id", "delivery_notes")]),
    "deliveries": ("delivery_id", "created_at", "Deliver Order", [("note_id", "delivery_notes")]),
    "invoices": ("invoice_id", "created_at", "Post Invoice", [("delivery_id", "deliveries")]),
}

CPT_EDGES = [
    ("orders", "order_items"),
    ("order_items", "delivery_preparations"),
    ("delivery_preparations", "picking_plans"),
    ("picking_plans", "picks"),
    ("picks", "delivery_notes"),
    ("picks", "customer_pickups"),
    ("delivery_notes", "group_delivery_notes"),
    ("delivery_notes", "deliveries"),
    ("deliveries", "invoices"),
]


@dataclass
class GeneratorConfig:
    orders: int = 1000
    items_per_order: tuple[int, int] = (1, 3)
    batching_probability: float = 0.2
    pickup_probability: float = 0.05
    group_note_probability: float = 0.5
    anomaly_rate: float = 0.0
    anomaly_count: int | None = None
    start: str = "2021-01-04T08:00:00"
    mean_order_gap_s: float = 60.0

    @classmethod
    def from_dict(cls, doc: dict | None) -> "GeneratorConfig":
        doc = dict(doc or {})
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"generator: unknown option(s) {sorted(unknown)}")
        if "items_per_order" in doc:
            doc["items_per_order"] = tuple(doc["items_per_order"])
        cfg = cls(**doc)
        cfg.check()
        return cfg

    def check(self) -> None:
        lo, hi = self.items_per_order
        if not (1 <= lo <= hi):
            raise ConfigError(f"generator.items_per_order: need 1 <= lo <= hi, got {self.items_per_order}")
        if self.orders < 1:
            raise ConfigError("generator.orders: must be positive")
        for name in ("batching_probability", "pickup_probability", "group_note_probability", "anomaly_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"generator.{name}: probability {p} outside [0, 1]")
        if self.anomaly_count is not None and self.anomaly_count < 0:
            raise ConfigError("generator.anomaly_count: must be >= 0")


@dataclass
class GeneratedData:
    tables: dict[str, pd.DataFrame]
    manifest: dict = field(default_factory=dict)


def _ids(prefix: str, n: int) -> np.ndarray:
    width = max(6, len(str(n)))
    return np.array([f"{prefix}{i:0{width}d}" for i in range(1, n + 1)], dtype=object)


def _iso(us: np.ndarray) -> np.ndarray:
    return np.datetime_as_string(us.astype("datetime64[us]"), unit="us").astype(object)


def _group_cumsum(values: np.ndarray, group_start: np.ndarray) -> np.ndarray:
    """Exclusive cumulative sum restarting at every ``group_start``."""
    inc = np.cumsum(values) - values
    offsets = np.maximum.accumulate(np.where(group_start, inc, 0))
    return inc - offsets


def generate(cfg: GeneratorConfig, seed: int = 0) -> GeneratedData:
    rng = np.random.default_rng(seed)
    n = cfg.orders
    t0 = int(np.datetime64(cfg.start, "us").astype(np.int64))

    order_t = t0 + np.cumsum(rng.exponential(cfg.mean_order_gap_s, n) * SECOND).astype(np.int64)
    lo, hi = cfg.items_per_order
    k = rng.integers(lo, hi + 1, n)
    n_items = int(k.sum())
    item_order = np.repeat(np.arange(n), k)
    first = np.r_[True, item_order[1:] != item_order[:-1]]
    pos = _group_cumsum(np.ones(n_items, np.int64), first)

    # items extracted in a burst right after the order
    item_gap = rng.integers(1 * SECOND, 5 * SECOND, n_items)
    item_t = order_t[item_order] + _group_cumsum(item_gap, first) + item_gap

    # then processed one by one: prepare -> plan -> pick, next item after the pick
    last_extract = np.maximum.reduceat(item_t, np.flatnonzero(first))
    to_plan = rng.integers(30 * SECOND, 5 * MINUTE, n_items)
    to_pick = rng.integers(1 * MINUTE, 10 * MINUTE, n_items)
    to_next = rng.integers(10 * SECOND, 2 * MINUTE, n_items)
    prep_t = last_extract[item_order] + 30 * SECOND + _group_cumsum(to_plan + to_pick + to_next, first)
    plan_t = prep_t + to_plan
    pick_t = plan_t + to_pick

    # anomalies: preparation recorded after its plan
    if cfg.anomaly_count is not None:
        if cfg.anomaly_count > n_items:
            raise ConfigError(f"generator.anomaly_count: {cfg.anomaly_count} exceeds {n_items} preparations")
        anomalous = np.zeros(n_items, bool)
        anomalous[rng.choice(n_items, cfg.anomaly_count, replace=False)] = True
    else:
        anomalous = rng.random(n_items) < cfg.anomaly_rate
    prep_t = np.where(anomalous, plan_t + rng.integers(1 * SECOND, 10 * MINUTE, n_items), prep_t)

    order_done = np.maximum.reduceat(pick_t, np.flatnonzero(first))
    pickup = rng.random(n) < cfg.pickup_probability
    pickup_ids = _ids("CP", int(pickup.sum()))
    pickup_of_order = np.full(n, None, dtype=object)
    pickup_of_order[pickup] = pickup_ids
    pickup_t = order_done[pickup] + rng.integers(1 * HOUR, 8 * HOUR, int(pickup.sum()))

    # delivery notes: shipped orders join the previous note with the batching probability
    shipped = np.flatnonzero(~pickup)
    join = rng.random(len(shipped)) < cfg.batching_probability
    if len(join):
        join[0] = False
    note_idx = np.cumsum(~join) - 1
    n_notes = int(note_idx[-1] + 1) if len(note_idx) else 0
    note_ids = _ids("DN", n_notes)
    note_of_order = np.full(n, None, dtype=object)
    note_of_order[shipped] = note_ids[note_idx] if n_notes else []
    ready = np.full(n_notes, np.iinfo(np.int64).min, dtype=np.int64)
    np.maximum.at(ready, note_idx, order_done[shipped])
    note_t = ready + rng.integers(5 * MINUTE, 1 * HOUR, n_notes)
    grouped = rng.random(n_notes) < cfg.group_note_probability
    group_t = note_t[grouped] + rng.integers(1 * MINUTE, 30 * MINUTE, int(grouped.sum()))
    delivery_t = note_t + rng.integers(1 * HOUR, 4 * HOUR, n_notes)
    invoice_t = delivery_t + rng.integers(1 * HOUR, 24 * HOUR, n_notes)

    order_ids = _ids("O", n)
    item_ids = _ids("I", n_items)
    prep_ids = _ids("PR", n_items)
    plan_ids = _ids("PL", n_items)
    pick_ids = _ids("PK", n_items)
    delivery_ids = _ids("DL", n_notes)
    tables = {
        "orders": pd.DataFrame({"order_id": order_ids, "created_at": _iso(order_t)}),
        "order_items": pd.DataFrame({"item_id": item_ids, "order_id": order_ids[item_order], "created_at": _iso(item_t)}),
        "delivery_preparations": pd.DataFrame({"prep_id": prep_ids, "item_id": item_ids, "created_at": _iso(prep_t)}),
        "picking_plans": pd.DataFrame({"plan_id": plan_ids, "prep_id": prep_ids, "created_at": _iso(plan_t)}),
        "picks": pd.DataFrame({
            "pick_id": pick_ids, "plan_id": plan_ids,
            "note_id": note_of_order[item_order], "pickup_id": pickup_of_order[item_order],
            "created_at": _iso(pick_t),
        }),
        "customer_pickups": pd.DataFrame({"pickup_id": pickup_ids, "created_at": _iso(pickup_t)}),
        "delivery_notes": pd.DataFrame({"note_id": note_ids, "created_at": _iso(note_t)}),
        "group_delivery_notes": pd.DataFrame({
            "group_id": _ids("GN", int(grouped.sum())), "note_id": note_ids[grouped], "created_at": _iso(group_t),
        }),
        "deliveries": pd.DataFrame({"delivery_id": delivery_ids, "note_id": note_ids, "created_at": _iso(delivery_t)}),
        "invoices": pd.DataFrame({"invoice_id": _ids("IN", n_notes), "delivery_id": delivery_ids, "created_at": _iso(invoice_t)}),
    }
    manifest = {
        "seed": seed,
        "config": {**asdict(cfg), "items_per_order": list(cfg.items_per_order)},
        "rows": {name: len(df) for name, df in tables.items()},
        "anomalies_injected": int(anomalous.sum()),
        "anomaly_eligible": n_items,
        "anomalous_preparations": prep_ids[anomalous].tolist(),
        "batched_orders": int(join.sum()),
    }
    return GeneratedData(tables, manifest)


def project_config(data_dir: str = ".", output_dir: str = "out") -> dict:
    """Full project config (source, template, output) describing generated tables."""
    tables = {}
    for name, (pk, ts, label, fks) in TABLES.items():
        tables[name] = {
            "file": f"{name}.csv", "pk": pk, "timestamp": ts, "label": label,
            "fks": [{"column": c, "references": r} for c, r in fks],
        }
    return {
        "source": {"dir": data_dir, "root": "orders", "tables": tables},
        "cpt": {"relations": list(TABLES), "edges": [{"from": a, "to": b} for a, b in CPT_EDGES]},
        "output": {"dir": output_dir, "format": "json"},
    }


def write_dataset(data: GeneratedData, out_dir) -> Path:
    """Write tables as CSV plus ``config.json`` and ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, df in data.tables.items():
        df.to_csv(out / f"{name}.csv", index=False, lineterminator="\n")
    (out / "config.json").write_text(json.dumps(project_config(), indent=2) + "\n")
    (out / "manifest.json").write_text(json.dumps(data.manifest, indent=2) + "\n")
    return out
