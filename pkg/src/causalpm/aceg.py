"""Aggregated causal event graphs: event-type quantities and cardinalities.

Event types are identified by their label. Level 1 aggregates each view on
its own; level 2 merges views of identical structure; level 3 merges all.
Merged quantities count distinct events and edges (a shared event counts
once); merged cardinality ranges take min-of-mins and max-of-maxes over the
contributing views, where a view holding source-typed events but none of
the edge's target type contributes an out-degree of 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .ceg import ViewSet, as_viewset


@dataclass
class AggregatedCEG:
    types: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    node_quantity: dict[str, int]
    edge_quantity: dict[tuple[str, str], int]
    in_card: dict[tuple[str, str], tuple[int, int]]
    out_card: dict[tuple[str, str], tuple[int, int]]
    labels: dict[str, str]
    sources: tuple[str, ...] = ()
    start_quantity: dict[str, int] = field(default_factory=dict)
    end_quantity: dict[str, int] = field(default_factory=dict)

    def postset(self, t: str) -> list[str]:
        return [b for a, b in self.edges if a == t]

    def preset(self, t: str) -> list[str]:
        return [a for a, b in self.edges if b == t]

    def end_types(self) -> list[str]:
        origins = {a for a, _ in self.edges}
        return [t for t in self.types if t not in origins]

    def structure(self) -> tuple:
        return (self.types, self.edges, tuple(sorted(self.labels.items())))

    def is_partial_order(self) -> bool:
        succ = {}
        for a, b in self.edges:
            succ.setdefault(a, []).append(b)
        state = {}

        def visit(n):
            state[n] = 1
            for m in succ.get(n, ()):
                if state.get(m) == 1 or (not state.get(m) and not visit(m)):
                    return False
            state[n] = 2
            return True

        return all(state.get(t) or visit(t) for t in self.types)


def structurally_equal(a: AggregatedCEG, b: AggregatedCEG) -> bool:
    """Same event types, type edges and labels; quantities are ignored."""
    return a.structure() == b.structure()


# -- single-graph definitions -----------------------------------------------

def _type_code(graph, label):
    try:
        return graph.db.types.index(label)
    except ValueError:
        return -1


def type_quantity(graph, label: str) -> int:
    """Number of events of type ``label`` in the graph."""
    code = _type_code(graph, label)
    return int(np.count_nonzero(graph.db.type_code[graph.events] == code))


def edge_quantity(graph, label1: str, label2: str) -> int:
    """Number of distinct causal edges from a ``label1`` event to a ``label2`` event."""
    tc = graph.db.type_code
    c1, c2 = _type_code(graph, label1), _type_code(graph, label2)
    return int(np.count_nonzero((tc[graph.src] == c1) & (tc[graph.dst] == c2)))


def out_degree(graph, eid: str, label: str) -> int:
    """Edges leaving event ``eid`` towards events of type ``label``."""
    db = graph.db
    i = db.index_of(eid)
    code = _type_code(graph, label)
    return int(np.count_nonzero((graph.src == i) & (db.type_code[graph.dst] == code)))


def in_degree(graph, label: str, eid: str) -> int:
    """Edges entering event ``eid`` from events of type ``label``."""
    db = graph.db
    i = db.index_of(eid)
    code = _type_code(graph, label)
    return int(np.count_nonzero((graph.dst == i) & (db.type_code[graph.src] == code)))


def min_max_out(graph, label1: str, label2: str) -> tuple[int, int]:
    """Range of out-degrees towards ``label2`` over all ``label1`` events."""
    db = graph.db
    c1 = _type_code(graph, label1)
    sources = graph.events[db.type_code[graph.events] == c1]
    if len(sources) == 0:
        raise ValueError(f"no event of type {label1!r} in the graph")
    degs = [out_degree(graph, db.ids[s], label2) for s in sources]
    return min(degs), max(degs)


def min_max_in(graph, label1: str, label2: str) -> tuple[int, int]:
    """Range of in-degrees from ``label1`` over all ``label2`` events."""
    db = graph.db
    c2 = _type_code(graph, label2)
    targets = graph.events[db.type_code[graph.events] == c2]
    if len(targets) == 0:
        raise ValueError(f"no event of type {label2!r} in the graph")
    degs = [in_degree(graph, label1, db.ids[t]) for t in targets]
    return min(degs), max(degs)


# -- vectorised per-view statistics ------------------------------------------

@dataclass
class _ViewStats:
    nodes: pd.DataFrame   # view, t, count
    out: pd.DataFrame     # view, t1, t2, omin, omax, quantity
    inc: pd.DataFrame     # view, t1, t2, imin, imax


def _view_stats(vs: ViewSet) -> _ViewStats:
    db = vs.db
    tc = db.type_code
    pv = vs.view_of_event
    pe = vs.ev_idx
    nodes = (
        pd.DataFrame({"view": pv, "t": tc[pe]})
        .groupby(["view", "t"], sort=True).size().rename("count").reset_index()
    )
    qv = vs.view_of_edge
    edges = pd.DataFrame({"view": qv, "s": vs.ed_src, "d": vs.ed_dst, "t1": tc[vs.ed_src], "t2": tc[vs.ed_dst]})
    node_count = nodes.set_index(["view", "t"])["count"]

    outdeg = edges.groupby(["view", "s", "t1", "t2"], sort=False).size().rename("deg").reset_index()
    out = outdeg.groupby(["view", "t1", "t2"], sort=True).agg(
        omin=("deg", "min"), omax=("deg", "max"), n=("deg", "size"), quantity=("deg", "sum")
    ).reset_index()
    have = node_count.reindex(pd.MultiIndex.from_arrays([out["view"], out["t1"]])).to_numpy()
    out.loc[out["n"].to_numpy() < have, "omin"] = 0
    out = out.drop(columns="n")

    indeg = edges.groupby(["view", "d", "t1", "t2"], sort=False).size().rename("deg").reset_index()
    inc = indeg.groupby(["view", "t1", "t2"], sort=True).agg(
        imin=("deg", "min"), imax=("deg", "max"), n=("deg", "size")
    ).reset_index()
    have = node_count.reindex(pd.MultiIndex.from_arrays([inc["view"], inc["t2"]])).to_numpy()
    inc.loc[inc["n"].to_numpy() < have, "imin"] = 0
    inc = inc.drop(columns="n")
    return _ViewStats(nodes, out, inc)


def _terminal_counts(vs: ViewSet, views: np.ndarray):
    """Distinct events and edges of the selected views, plus start/end counts per type."""
    db = vs.db
    sel_ev = np.concatenate([vs.ev_idx[vs.ev_ptr[v]:vs.ev_ptr[v + 1]] for v in views]) if len(views) else np.empty(0, np.int64)
    sel_src = np.concatenate([vs.ed_src[vs.ed_ptr[v]:vs.ed_ptr[v + 1]] for v in views]) if len(views) else np.empty(0, np.int64)
    sel_dst = np.concatenate([vs.ed_dst[vs.ed_ptr[v]:vs.ed_ptr[v + 1]] for v in views]) if len(views) else np.empty(0, np.int64)
    return _union_counts(db, sel_ev, sel_src, sel_dst)


def _union_counts(db, ev, src, dst):
    n = max(len(db), 1)
    ev = np.unique(ev)
    codes = np.unique(src * n + dst)
    src, dst = codes // n, codes % n
    tc = db.type_code
    ntypes = len(db.types)
    node_q = np.bincount(tc[ev], minlength=ntypes)
    has_in = np.zeros(len(db), bool)
    has_out = np.zeros(len(db), bool)
    has_in[dst] = True
    has_out[src] = True
    start_q = np.bincount(tc[ev[~has_in[ev]]], minlength=ntypes)
    end_q = np.bincount(tc[ev[~has_out[ev]]], minlength=ntypes)
    pair = tc[src].astype(np.int64) * ntypes + tc[dst]
    up, cnt = np.unique(pair, return_counts=True)
    edge_q = {(int(p // ntypes), int(p % ntypes)): int(c) for p, c in zip(up, cnt)}
    return node_q, edge_q, start_q, end_q


def _assemble(vs: ViewSet, stats: _ViewStats, views: np.ndarray) -> AggregatedCEG:
    db = vs.db
    names = db.types
    views = np.asarray(views, dtype=np.int64)
    node_q, edge_q, start_q, end_q = _terminal_counts(vs, views)
    nodes = stats.nodes[stats.nodes["view"].isin(views)]
    out = stats.out[stats.out["view"].isin(views)]
    inc = stats.inc[stats.inc["view"].isin(views)]
    type_codes = sorted(set(nodes["t"].tolist()))
    views_with_type = nodes.groupby("t")["view"].nunique()

    out_card, in_card = {}, {}
    for (t1, t2), g in out.groupby(["t1", "t2"], sort=True):
        lo = int(g["omin"].min())
        if len(g) < views_with_type.get(t1, 0):
            lo = 0
        out_card[(names[t1], names[t2])] = (lo, int(g["omax"].max()))
    for (t1, t2), g in inc.groupby(["t1", "t2"], sort=True):
        in_card[(names[t1], names[t2])] = (int(g["imin"].min()), int(g["imax"].max()))

    types = tuple(sorted(names[t] for t in type_codes))
    edges = tuple(sorted(out_card))
    return AggregatedCEG(
        types=types,
        edges=edges,
        node_quantity={names[t]: int(node_q[t]) for t in type_codes},
        edge_quantity={(names[a], names[b]): q for (a, b), q in edge_q.items()},
        in_card=in_card,
        out_card=out_card,
        labels={t: t for t in types},
        sources=tuple(sorted(vs.keys[v] for v in views)),
        start_quantity={names[t]: int(start_q[t]) for t in type_codes if start_q[t]},
        end_quantity={names[t]: int(end_q[t]) for t in type_codes if end_q[t]},
    )


def aggregate_level1(views) -> AggregatedCEG | list[AggregatedCEG]:
    """One ACEG per view. A single view gives a single ACEG, a collection a list."""
    single = not isinstance(views, (ViewSet, list, tuple))
    vs = as_viewset(views)
    stats = _view_stats(vs)
    result = [_assemble(vs, stats, np.array([i])) for i in range(len(vs))]
    return result[0] if single else result


def _signatures(vs: ViewSet, stats: _ViewStats) -> list[tuple]:
    types = [[] for _ in range(len(vs))]
    for v, t in zip(stats.nodes["view"].to_numpy(), stats.nodes["t"].to_numpy()):
        types[v].append(int(t))
    edges = [[] for _ in range(len(vs))]
    for v, a, b in zip(stats.out["view"].to_numpy(), stats.out["t1"].to_numpy(), stats.out["t2"].to_numpy()):
        edges[v].append((int(a), int(b)))
    return [(tuple(t), tuple(e)) for t, e in zip(types, edges)]


def aggregate_level2(views) -> list[AggregatedCEG]:
    """Merge views whose level-1 ACEGs share types, type edges and labels."""
    vs = as_viewset(views)
    if len(vs) == 0:
        return []
    stats = _view_stats(vs)
    groups: dict[tuple, list[int]] = {}
    for i, sig in enumerate(_signatures(vs, stats)):
        groups.setdefault(sig, []).append(i)
    names = vs.db.types
    readable = lambda sig: (sorted(names[t] for t in sig[0]), sorted((names[a], names[b]) for a, b in sig[1]))
    ordered = sorted(groups, key=readable)
    return [_assemble(vs, stats, np.array(groups[s])) for s in ordered]


def aggregate_level3(views) -> AggregatedCEG:
    """One ACEG over all views."""
    vs = as_viewset(views)
    stats = _view_stats(vs)
    return _assemble(vs, stats, np.arange(len(vs)))
