"""KPIs, distributions, temporal violations, the DFG baseline and conformance metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .aceg import AggregatedCEG
from .ceg import CausalEventDatabase, ViewSet, as_viewset, batching_mask, case_projection, fragments

START, END = "Start", "End"


# -- cycle-time KPIs ----------------------------------------------------------

@dataclass(frozen=True)
class CycleTimeStats:
    """min/avg/max in microseconds; all ``None`` when there are no samples."""

    min: int | None
    avg: float | None
    max: int | None
    count: int

    @classmethod
    def of(cls, samples) -> "CycleTimeStats":
        s = np.asarray(samples, dtype=np.int64)
        if len(s) == 0:
            return cls(None, None, None, 0)
        return cls(int(s.min()), float(s.mean()), int(s.max()), int(len(s)))

    def to_dict(self) -> dict:
        return {"min": self.min, "avg": self.avg, "max": self.max, "count": self.count}


def view_cycle_times(views) -> np.ndarray:
    """Cycle time of every (view, event) entry, aligned with ``views.ev_idx``.

    Predecessors are restricted to the view the event is seen in.
    """
    vs = as_viewset(views)
    db = vs.db
    t = db.timestamps
    n = max(len(db), 1)
    pair = vs.view_of_event * n + vs.ev_idx
    qv = vs.view_of_edge
    ok = t[vs.ed_src] <= t[vs.ed_dst]
    target = qv[ok] * n + vs.ed_dst[ok]
    src_t = t[vs.ed_src[ok]]
    out = np.zeros(len(pair), dtype=np.int64)
    if len(target) == 0:
        return out
    order = np.lexsort((src_t, target))
    target, src_t = target[order], src_t[order]
    last = np.r_[target[1:] != target[:-1], True]
    uniq, latest = target[last], src_t[last]
    pos = np.searchsorted(uniq, pair)
    pos_c = np.minimum(pos, len(uniq) - 1)
    hit = uniq[pos_c] == pair
    out[hit] = t[vs.ev_idx[hit]] - latest[pos_c[hit]]
    return out


def event_type_cycle_stats(views, label: str, include_start: bool = True) -> CycleTimeStats:
    """min/avg/max cycle time over every ``label`` event of every view.

    An event shared by several views contributes once per view. With
    ``include_start=False``, events without a predecessor in their view are
    left out instead of counting as 0.
    """
    vs = as_viewset(views)
    db = vs.db
    if label not in db.types:
        return CycleTimeStats.of([])
    ct = view_cycle_times(vs)
    mask = db.type_code[vs.ev_idx] == db.types.index(label)
    if not include_start:
        n = max(len(db), 1)
        has_pred = np.isin(vs.view_of_event * n + vs.ev_idx, vs.view_of_edge * n + vs.ed_dst)
        mask &= has_pred
    return CycleTimeStats.of(ct[mask])


def view_spans(views) -> np.ndarray:
    """Latest minus earliest timestamp of each non-empty view."""
    vs = as_viewset(views)
    t = vs.db.timestamps[vs.ev_idx]
    sizes = np.diff(vs.ev_ptr)
    starts = vs.ev_ptr[:-1][sizes > 0]
    if len(starts) == 0:
        return np.empty(0, dtype=np.int64)
    return np.maximum.reduceat(t, starts) - np.minimum.reduceat(t, starts)


def ceg_cycle_stats(views) -> CycleTimeStats:
    """Stats over per-view spans (latest minus earliest event)."""
    return CycleTimeStats.of(view_spans(views))


def fragment_cycle_stats(db_or_fragments) -> CycleTimeStats:
    """Same as :func:`ceg_cycle_stats`, over the fragments of a database."""
    if isinstance(db_or_fragments, CausalEventDatabase):
        db_or_fragments = fragments(db_or_fragments)
    return ceg_cycle_stats(db_or_fragments)


# -- distributions --------------------------------------------------------------

def _distribution(counts: Mapping[str, int]) -> dict[str, tuple[int, float]]:
    total = sum(counts.values())
    return {k: (v, v / total) for k, v in sorted(counts.items()) if v} if total else {}


def end_event_distribution(level3: AggregatedCEG, views=None) -> dict[str, tuple[int, float]]:
    """Quantities of the types without successor type, absolute and relative.

    ``views`` is accepted for symmetry with the other KPIs; the counts come
    from the (distinct-event) node quantities of ``level3``.
    """
    return _distribution({t: level3.node_quantity.get(t, 0) for t in level3.end_types()})


def batching_type_distribution(db: CausalEventDatabase, root: str | None = None) -> dict[str, tuple[int, float]]:
    mask = batching_mask(db, root)
    codes = db.type_code[mask]
    counts = np.bincount(codes, minlength=len(db.types))
    return _distribution({db.types[i]: int(c) for i, c in enumerate(counts)})


# -- temporal violations --------------------------------------------------------

@dataclass(frozen=True, order=True)
class TemporalViolation:
    cause: str
    effect: str
    cause_timestamp: int
    effect_timestamp: int


def violation_mask(graph) -> np.ndarray:
    """Per edge of ``graph``: the cause is strictly later than its effect."""
    t = graph.db.timestamps
    return t[graph.src] > t[graph.dst]


def temporal_violations(graph) -> list[TemporalViolation]:
    db = graph.db
    m = violation_mask(graph)
    s, d = graph.src[m], graph.dst[m]
    t = db.timestamps
    return sorted(
        TemporalViolation(db.ids[a], db.ids[b], int(t[a]), int(t[b])) for a, b in zip(s, d)
    )


def violation_counts(graph) -> dict[tuple[str, str], int]:
    """Violating edges grouped by (cause type, effect type)."""
    db = graph.db
    m = violation_mask(graph)
    tc = db.type_code
    out: dict[tuple[str, str], int] = {}
    for a, b in zip(tc[graph.src[m]], tc[graph.dst[m]]):
        key = (db.types[a], db.types[b])
        out[key] = out.get(key, 0) + 1
    return dict(sorted(out.items()))


# -- flattening and the DFG baseline ---------------------------------------------

def flatten_to_event_log(db: CausalEventDatabase, root: str | None = None) -> pd.DataFrame:
    """Classical event log: one row per (case projection, event).

    Events shared by several cases are duplicated. Rows are sorted by case,
    timestamp and event id.
    """
    cols = ["case_id", "activity", "timestamp", "event_id"]
    if len(db) == 0:
        return pd.DataFrame({c: pd.Series(dtype=object if c != "timestamp" else np.int64) for c in cols})
    vs = case_projection(db, root)
    keys = np.asarray(vs.keys, dtype=object)
    ev = vs.ev_idx
    log = pd.DataFrame({
        "case_id": keys[vs.view_of_event],
        "activity": np.asarray(db.types, dtype=object)[db.type_code[ev]],
        "timestamp": db.timestamps[ev],
        "event_id": db.ids[ev],
    })
    return log.sort_values(cols[:1] + ["timestamp", "event_id"], kind="mergesort").reset_index(drop=True)


@dataclass
class DirectlyFollowsGraph:
    activities: tuple[str, ...]
    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def self_loops(self) -> dict[str, int]:
        return {a: c for (a, b), c in self.counts.items() if a == b}

    def edge_quantities(self) -> dict[tuple[str, str], int]:
        return dict(self.counts)


def mine_dfg(log: pd.DataFrame) -> DirectlyFollowsGraph:
    """Count adjacent activity pairs per case, plus Start/End per case.

    The log is re-sorted by (case, timestamp, event id) so ties break
    deterministically.
    """
    if len(log) == 0:
        return DirectlyFollowsGraph((START, END), {})
    by = ["case_id", "timestamp"] + (["event_id"] if "event_id" in log.columns else [])
    log = log.sort_values(by, kind="mergesort")
    case = log["case_id"].to_numpy()
    act = log["activity"].to_numpy()
    first = np.r_[True, case[1:] != case[:-1]]
    last = np.r_[case[1:] != case[:-1], True]
    frm = np.concatenate([np.full(first.sum(), START, dtype=object), act[:-1][~first[1:]], act[last]])
    to = np.concatenate([act[first], act[1:][~first[1:]], np.full(last.sum(), END, dtype=object)])
    pairs = pd.Series(1, index=pd.MultiIndex.from_arrays([frm, to])).groupby(level=[0, 1]).sum()
    counts = {(a, b): int(c) for (a, b), c in pairs.items()}
    activities = tuple([START] + sorted(set(act)) + [END])
    return DirectlyFollowsGraph(activities, counts)


# -- conformance -----------------------------------------------------------------

def expected_type_edges(cpt, labels: Mapping[str, str]) -> set[tuple[str, str]]:
    """Template edges lifted to labels, with Start before sources and End after sinks."""
    lab = lambda r: labels.get(r, r)
    out = {(lab(a), lab(b)) for a, b in cpt.edges}
    out |= {(START, lab(r)) for r in cpt.sources()}
    out |= {(lab(r), END) for r in cpt.sinks()}
    return out


def graph_quantities(graph) -> dict[tuple[str, str], int]:
    """Edge quantities including Start/End pseudo-edges."""
    if isinstance(graph, DirectlyFollowsGraph):
        return dict(graph.counts)
    if isinstance(graph, AggregatedCEG):
        q = dict(graph.edge_quantity)
        q.update({(START, t): n for t, n in graph.start_quantity.items() if n})
        q.update({(t, END): n for t, n in graph.end_quantity.items() if n})
        return q
    return dict(graph)


@dataclass
class ConformanceRow:
    source: str
    expected: dict[str, int]
    unexpected: dict[str, int]
    violations: dict[str, int]

    @property
    def expected_total(self) -> int:
        return sum(self.expected.values())

    @property
    def unexpected_total(self) -> int:
        return sum(self.unexpected.values())

    @property
    def violation_total(self) -> int:
        return sum(self.violations.values())

    def ratio(self, target: str | None = None) -> float | None:
        """Unexpected quantity of the row over the expected quantity, in percent."""
        exp = self.expected.get(target, 0) if target is not None else self.expected_total
        if exp == 0:
            return None if self.unexpected_total else 0.0
        return 100.0 * self.unexpected_total / exp


@dataclass
class ConformanceTable:
    rows: dict[str, ConformanceRow]
    expected_edges: frozenset

    @property
    def score(self) -> int:
        return sum(r.unexpected_total + r.violation_total for r in self.rows.values())

    def edges(self) -> list[tuple[str, str, int, int, float | None]]:
        """(source, target, expected, unexpected, ratio) per expected edge."""
        out = []
        for a, b in sorted(self.expected_edges):
            row = self.rows.get(a)
            if row is None:
                out.append((a, b, 0, 0, 0.0))
            else:
                out.append((a, b, row.expected.get(b, 0), row.unexpected_total, row.ratio(b)))
        return out

    def to_frame(self) -> pd.DataFrame:
        """Source x target grid with "quantity / violations" cells and a Total column."""
        names = sorted({n for a, b in self.expected_edges for n in (a, b)} | set(self.rows)
                       | {t for r in self.rows.values() for t in (*r.expected, *r.unexpected)})
        names = [START] + [n for n in names if n not in (START, END)] + [END]
        grid = []
        for s in names:
            row = self.rows.get(s)
            line = {"source": s}
            for t in names:
                q = 0 if row is None else row.expected.get(t, row.unexpected.get(t, 0))
                v = 0 if row is None else row.violations.get(t, 0)
                line[t] = f"{q} / {v}"
            if row is None:
                line["Total"] = "0 / 0 (0.00%)"
            else:
                r = row.ratio()
                pct = "n/a" if r is None else f"{r:.2f}%"
                line["Total"] = f"{row.expected_total} / {row.unexpected_total} ({pct})"
            grid.append(line)
        return pd.DataFrame(grid, columns=["source", *names, "Total"])


def conformance_table(
    graph,
    expected: Iterable[tuple[str, str]],
    violations: Mapping[tuple[str, str], int] | None = None,
    label_map: Mapping[str, str] | None = None,
) -> ConformanceTable:
    """Classify the quantities of ``graph`` against the expected type edges.

    Parameters
    ----------
    graph
        An :class:`AggregatedCEG`, a :class:`DirectlyFollowsGraph` or a
        mapping ``(source, target) -> quantity``.
    expected
        Expected type edges, including ``Start``/``End`` pseudo-edges.
    violations
        Violating edges per type pair; only those on expected edges are kept,
        since an unexpected edge already counts in full.
    label_map
        Renames graph labels to the expected model's labels first.
    """
    expected = frozenset(expected)
    rename = (lambda x: label_map.get(x, x)) if label_map else (lambda x: x)
    quantities: dict[tuple[str, str], int] = {}
    for (a, b), q in graph_quantities(graph).items():
        key = (rename(a), rename(b))
        quantities[key] = quantities.get(key, 0) + int(q)
    viol: dict[tuple[str, str], int] = {}
    for (a, b), v in (violations or {}).items():
        key = (rename(a), rename(b))
        viol[key] = viol.get(key, 0) + int(v)
    rows: dict[str, ConformanceRow] = {}
    for (a, b), q in sorted(quantities.items()):
        row = rows.setdefault(a, ConformanceRow(a, {}, {}, {}))
        if (a, b) in expected:
            row.expected[b] = q
            if viol.get((a, b)):
                row.violations[b] = viol[(a, b)]
        else:
            row.unexpected[b] = q
    return ConformanceTable(rows, expected)


def conformance_score(graph, expected=None, violations=None, label_map=None) -> int:
    """Cumulative unexpected quantity, plus violations on expected edges when given."""
    if isinstance(graph, ConformanceTable):
        return graph.score
    return conformance_table(graph, expected or (), violations, label_map).score


def ratio_percent(expected: int, unexpected: int) -> float:
    """``unexpected / expected`` in percent."""
    if expected <= 0:
        raise ValueError("expected quantity must be positive")
    return 100.0 * unexpected / expected
