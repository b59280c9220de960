"""Causal event graphs built from causally connected tuples.

The database is stored column-wise so a million events stay cheap:

* events are indexed ``0..n-1`` in lexicographic order of their ids
  (``"<relation>:<key>"``), with parallel arrays for relation, key, type
  and timestamp;
* edges are two index arrays sorted by ``(src, dst)``;
* fragments are the rows of ``tuples``, an ``(n_fragments, n_relations)``
  matrix of event indices with ``-1`` for relations the tuple lacks.

Fragments, components and case projections are returned as :class:`ViewSet`
objects whose members (:class:`CEGView`) carry their induced edges.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .catalog import CausallyConnectedTuple, JoinResult, RelationInstance
from .cpt import CausalProcessTemplate
from .errors import ConfigError, DataError, ValidationError

log = logging.getLogger(__name__)


def event_id(relation: str, key: str) -> str:
    return f"{relation}:{key}"


@dataclass(frozen=True)
class Event:
    id: str
    relation: str
    key: str
    type: str
    timestamp: int


def _expand_ranges(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenate ``arange(s, s + l)`` for every (s, l) pair."""
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(np.cumsum(lengths) - lengths, lengths)
    return np.repeat(starts, lengths) + (np.arange(total, dtype=np.int64) - offsets)


class _GraphMixin:
    """Lookups shared by the database and its views (``events``, ``src``, ``dst`` index arrays)."""

    db: "CausalEventDatabase"
    events: np.ndarray
    src: np.ndarray
    dst: np.ndarray

    @property
    def event_ids(self) -> list[str]:
        return self.db.ids[self.events].tolist()

    def edge_ids(self) -> set[tuple[str, str]]:
        ids = self.db.ids
        return set(zip(ids[self.src].tolist(), ids[self.dst].tolist()))

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def __contains__(self, eid) -> bool:
        i = self.db.index_of(eid, missing=-1)
        if i < 0:
            return False
        pos = np.searchsorted(self.events, i)
        return bool(pos < len(self.events) and self.events[pos] == i)

    def preset(self, eid: str) -> set[str]:
        i = self.db.index_of(eid)
        return set(self.db.ids[self.src[self.dst == i]].tolist())

    def postset(self, eid: str) -> set[str]:
        i = self.db.index_of(eid)
        return set(self.db.ids[self.dst[self.src == i]].tolist())

    def event_list(self) -> list[Event]:
        return [self.db.event_at(i) for i in self.events]


class CausalEventDatabase(_GraphMixin):
    """Union of all fragments; immutable after construction."""

    def __init__(self, relations, labels, root, ids, rel_code, keys, timestamps, src, dst, tuples, causal_pairs=()):
        self.relations: tuple[str, ...] = tuple(relations)
        self.labels: dict[str, str] = dict(labels)
        self.root: str = root
        self.ids = np.asarray(ids, dtype=object)
        self.rel_code = np.asarray(rel_code, dtype=np.int32)
        self.keys = np.asarray(keys, dtype=object)
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.tuples = np.asarray(tuples, dtype=np.int64).reshape(-1, len(self.relations))
        self.causal_pairs = tuple(sorted(causal_pairs))
        self.types: list[str] = sorted(set(self.labels[r] for r in self.relations))
        type_of_rel = np.array([self.types.index(self.labels[r]) for r in self.relations], dtype=np.int32)
        self.type_code = type_of_rel[self.rel_code] if len(self.rel_code) else np.empty(0, dtype=np.int32)
        self._index = None
        self._out_ptr = None
        self._membership = None

    # graph protocol
    @property
    def db(self):
        return self

    @property
    def events(self) -> np.ndarray:
        return np.arange(len(self.ids), dtype=np.int64)

    @property
    def n_fragments(self) -> int:
        return len(self.tuples)

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, CausalEventDatabase):
            return NotImplemented
        return (
            self.relations == other.relations
            and self.labels == other.labels
            and self.root == other.root
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.tuples, other.tuples)
        )

    def __repr__(self):
        return f"<CausalEventDatabase {len(self)} events, {self.n_edges} edges, {self.n_fragments} fragments>"

    def index_of(self, eid: str, missing=None) -> int:
        if self._index is None:
            self._index = {e: i for i, e in enumerate(self.ids.tolist())}
        i = self._index.get(eid)
        if i is None:
            if missing is not None:
                return missing
            raise KeyError(eid)
        return i

    def event_at(self, i: int) -> Event:
        rel = self.relations[self.rel_code[i]]
        return Event(self.ids[i], rel, self.keys[i], self.labels[rel], int(self.timestamps[i]))

    def event(self, eid: str) -> Event:
        return self.event_at(self.index_of(eid))

    def relation_of(self, i) -> str:
        return self.relations[self.rel_code[i]]

    def type_of(self, eid: str) -> str:
        return self.types[self.type_code[self.index_of(eid)]]

    def out_ptr(self) -> np.ndarray:
        """CSR row pointer of the (src-sorted) edge arrays."""
        if self._out_ptr is None:
            counts = np.bincount(self.src, minlength=len(self.ids))
            self._out_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return self._out_ptr

    def preset(self, eid: str) -> set[str]:
        i = self.index_of(eid)
        return set(self.ids[self.src[self.dst == i]].tolist())

    def postset(self, eid: str) -> set[str]:
        i = self.index_of(eid)
        p = self.out_ptr()
        return set(self.ids[self.dst[p[i]:p[i + 1]]].tolist())

    def membership_ptr(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (ptr, fragment ids) mapping each event to the fragments containing it."""
        if self._membership is None:
            frag = np.repeat(np.arange(len(self.tuples), dtype=np.int64), self.tuples.shape[1])
            ev = self.tuples.ravel()
            keep = ev >= 0
            frag, ev = frag[keep], ev[keep]
            order = np.lexsort((frag, ev))
            counts = np.bincount(ev, minlength=len(self.ids))
            ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            self._membership = (ptr, frag[order])
        return self._membership

    def membership(self, eid: str) -> set[int]:
        ptr, frags = self.membership_ptr()
        i = self.index_of(eid)
        return set(frags[ptr[i]:ptr[i + 1]].tolist())

    def fragment_events(self, f: int) -> list[str]:
        row = self.tuples[f]
        return sorted(self.ids[row[row >= 0]].tolist())


# -- construction -----------------------------------------------------------

def _tuple_frame(tuples, cpt: CausalProcessTemplate, root: str | None) -> JoinResult:
    if isinstance(tuples, JoinResult):
        return tuples
    tuples = list(tuples)
    order = cpt.topological_order()
    return JoinResult.from_tuples(tuples, order, root or order[0])


def build_ceg_db(
    tuples,
    cpt: CausalProcessTemplate,
    instances: Mapping[str, RelationInstance],
    root: str | None = None,
) -> CausalEventDatabase:
    """Union of the fragments of all causally connected tuples.

    Parameters
    ----------
    tuples
        A :class:`JoinResult` or any iterable of :class:`CausallyConnectedTuple`.
        Duplicates and ordering do not matter.
    cpt
        A template that is a partial order; its covering edges (or closure, if
        the template says so) decide which event pairs become edges.
    instances
        Relation instances, used for timestamps and labels.
    root
        Relation whose keys identify cases (for batching detection). Defaults
        to the join root.
    """
    cycle = cpt.find_cycle()
    if cycle is not None:
        raise ValidationError(f"causal process template has a cycle: {cycle}")
    join = _tuple_frame(tuples, cpt, root)
    root = root or join.root
    unknown = [r for r in join.relations if r not in cpt.relations]
    if unknown:
        raise ConfigError(f"relation(s) {unknown} appear in the tuples but not in the template")
    if root not in join.relations:
        raise ConfigError(f"root relation {root!r} is not part of the tuples")
    relations = join.relations
    labels = {}
    for r in relations:
        if r not in instances:
            raise DataError(f"no instance loaded for relation {r!r}")
        labels[r] = instances[r].schema.display_label

    # events: relation blocks in id order, keys sorted within each block
    block_order = sorted(range(len(relations)), key=lambda c: relations[c] + ":")
    frame = join.frame
    per_rel_keys = {}
    for c in range(len(relations)):
        col = frame[relations[c]]
        per_rel_keys[c] = np.sort(pd.unique(col[col.notna()].to_numpy(dtype=object)).astype(object))
    ids, rel_code, keys, stamps = [], [], [], []
    offsets = {}
    pos = 0
    for c in block_order:
        r = relations[c]
        k = per_rel_keys[c]
        offsets[c] = pos
        pos += len(k)
        ts = instances[r].timestamps()
        found = pd.Index(ts.index).get_indexer(k)
        if (found < 0).any():
            raise DataError(f"{r}: key {k[np.flatnonzero(found < 0)[0]]!r} has no row in the instance")
        stamps.append(ts.to_numpy()[found])
        keys.append(k)
        rel_code.append(np.full(len(k), c, dtype=np.int32))
        ids.append(np.array([f"{r}:{x}" for x in k], dtype=object))
    cat = (lambda parts, dt: np.concatenate(parts) if parts else np.empty(0, dtype=dt))
    ids = cat(ids, object)
    keys = cat(keys, object)
    rel_code = cat(rel_code, np.int32)
    stamps = cat(stamps, np.int64)

    n_rel = len(relations)
    mat = np.full((len(frame), n_rel), -1, dtype=np.int64)
    for c in range(n_rel):
        col = frame[relations[c]].to_numpy(dtype=object)
        idx = pd.Index(per_rel_keys[c]).get_indexer(col)
        mat[:, c] = np.where(idx >= 0, idx + offsets[c], -1)
    if len(mat):
        mat = np.unique(mat, axis=0)
    pairs = sorted(p for p in cpt.causal_pairs() if p[0] in relations and p[1] in relations)
    n = len(ids)
    codes = []
    col_of = {r: c for c, r in enumerate(relations)}
    for a, b in pairs:
        ca, cb = mat[:, col_of[a]], mat[:, col_of[b]]
        both = (ca >= 0) & (cb >= 0)
        codes.append(ca[both] * n + cb[both])
    codes = np.unique(np.concatenate(codes)) if codes else np.empty(0, dtype=np.int64)
    src, dst = codes // max(n, 1), codes % max(n, 1)

    db = CausalEventDatabase(relations, labels, root, ids, rel_code, keys, stamps, src, dst, mat, pairs)
    _check_acyclic(db, cpt)
    log.info("built causal event database: %d events, %d edges, %d fragments", len(db), db.n_edges, db.n_fragments)
    return db


def _check_acyclic(db: CausalEventDatabase, cpt: CausalProcessTemplate) -> None:
    rank = {r: i for i, r in enumerate(cpt.topological_order())}
    rel_rank = np.array([rank[r] for r in db.relations], dtype=np.int64)
    if len(db.src) and not np.all(rel_rank[db.rel_code[db.src]] < rel_rank[db.rel_code[db.dst]]):
        raise RuntimeError("internal invariant failure: causal event graph contains a cycle")


def build_fragment(t: CausallyConnectedTuple, cpt: CausalProcessTemplate, instances, root: str | None = None) -> "CEGView":
    """The causal event graph of a single tuple."""
    missing = [r for r, _ in t.pairs if r not in cpt.relations]
    if missing:
        raise ConfigError(f"relation(s) {missing} not in the template")
    if root is None or t.get(root) is None:
        root = next(r for r in cpt.topological_order() if t.get(r) is not None)
    for r, k in t.pairs:
        if r not in instances or k not in set(instances[r].keys):
            raise DataError(f"({r}, {k}) has no row in the loaded instances")
    db = build_ceg_db([t], cpt, instances, root=root)
    return fragments(db)[0]


# -- views ------------------------------------------------------------------

class CEGView(_GraphMixin):
    """An event subset of the database with its induced edges."""

    def __init__(self, db: CausalEventDatabase, kind: str, key: str, events, src, dst):
        self._db = db
        self.kind = kind
        self.key = key
        self.events = events
        self.src = src
        self.dst = dst

    @property
    def db(self):
        return self._db

    def __len__(self):
        return len(self.events)

    def __repr__(self):
        return f"<CEGView {self.kind} {self.key}: {len(self.events)} events, {len(self.src)} edges>"


class ViewSet(Sequence):
    """A collection of views over one database in CSR layout."""

    def __init__(self, db, kind, keys, ev_ptr, ev_idx, ed_ptr, ed_src, ed_dst):
        self.db = db
        self.kind = kind
        self.keys = list(keys)
        self.ev_ptr = ev_ptr
        self.ev_idx = ev_idx
        self.ed_ptr = ed_ptr
        self.ed_src = ed_src
        self.ed_dst = ed_dst

    def __len__(self):
        return len(self.keys)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        a, b = self.ev_ptr[i], self.ev_ptr[i + 1]
        c, d = self.ed_ptr[i], self.ed_ptr[i + 1]
        return CEGView(self.db, self.kind, self.keys[i], self.ev_idx[a:b], self.ed_src[c:d], self.ed_dst[c:d])

    def __iter__(self) -> Iterator[CEGView]:
        for i in range(len(self)):
            yield self[i]

    def by_key(self, key: str) -> CEGView:
        return self[self.keys.index(key)]

    @property
    def view_of_event(self) -> np.ndarray:
        """View index of every entry of ``ev_idx``."""
        return np.repeat(np.arange(len(self), dtype=np.int64), np.diff(self.ev_ptr))

    @property
    def view_of_edge(self) -> np.ndarray:
        return np.repeat(np.arange(len(self), dtype=np.int64), np.diff(self.ed_ptr))

    @classmethod
    def from_views(cls, views: Iterable[CEGView]) -> "ViewSet":
        views = list(views)
        if not views:
            raise ValueError("cannot stack an empty list of views without a database")
        db = views[0].db
        if any(v.db is not db for v in views):
            raise ValueError("views belong to different databases")
        ev_ptr = np.concatenate([[0], np.cumsum([len(v.events) for v in views])]).astype(np.int64)
        ed_ptr = np.concatenate([[0], np.cumsum([len(v.src) for v in views])]).astype(np.int64)
        cat = lambda parts: np.concatenate(parts).astype(np.int64) if parts else np.empty(0, np.int64)
        kinds = {v.kind for v in views}
        return cls(
            db, kinds.pop() if len(kinds) == 1 else "mixed", [v.key for v in views], ev_ptr,
            cat([v.events for v in views]), ed_ptr, cat([v.src for v in views]), cat([v.dst for v in views]),
        )


def as_viewset(views) -> ViewSet:
    if isinstance(views, ViewSet):
        return views
    if isinstance(views, CEGView):
        return ViewSet.from_views([views])
    return ViewSet.from_views(views)


def _make_viewset(db: CausalEventDatabase, kind: str, keys, pair_view: np.ndarray, pair_event: np.ndarray) -> ViewSet:
    n = max(len(db), 1)
    n_views = len(keys)
    codes = np.unique(pair_view.astype(np.int64) * n + pair_event.astype(np.int64))
    pv, pe = codes // n, codes % n
    ev_ptr = np.concatenate([[0], np.cumsum(np.bincount(pv, minlength=n_views))]).astype(np.int64)
    # induced edges: expand out-edges of every (view, event) pair, keep those landing inside the view
    out_ptr = db.out_ptr()
    deg = out_ptr[pe + 1] - out_ptr[pe]
    pos = _expand_ranges(out_ptr[pe], deg)
    ev_view = np.repeat(pv, deg)
    e_src = np.repeat(pe, deg)
    e_dst = db.dst[pos]
    target = ev_view * n + e_dst
    hit = np.searchsorted(codes, target)
    hit = np.minimum(hit, max(len(codes) - 1, 0))
    keep = codes[hit] == target if len(codes) else np.zeros(len(target), bool)
    ev_view, e_src, e_dst = ev_view[keep], e_src[keep], e_dst[keep]
    ed_ptr = np.concatenate([[0], np.cumsum(np.bincount(ev_view, minlength=n_views))]).astype(np.int64)
    return ViewSet(db, kind, keys, ev_ptr, pe, ed_ptr, e_src, e_dst)


def fragments(db: CausalEventDatabase) -> ViewSet:
    """One view per causally connected tuple, keyed ``"f<index>"``."""
    mat = db.tuples
    rows = np.repeat(np.arange(len(mat), dtype=np.int64), mat.shape[1])
    ev = mat.ravel()
    keep = ev >= 0
    return _make_viewset(db, "fragment", [f"f{i}" for i in range(len(mat))], rows[keep], ev[keep])


def component_labels(db: CausalEventDatabase) -> tuple[int, np.ndarray]:
    """Connected-component label per event, numbered by smallest member index."""
    n = len(db)
    if n == 0:
        return 0, np.empty(0, dtype=np.int64)
    adj = sparse.coo_matrix((np.ones(len(db.src), dtype=np.int8), (db.src, db.dst)), shape=(n, n)).tocsr()
    count, labels = connected_components(adj, directed=False)
    first = np.full(count, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n))
    relabel = np.empty(count, dtype=np.int64)
    relabel[np.argsort(first, kind="stable")] = np.arange(count)
    return count, relabel[labels]


def components(db: CausalEventDatabase) -> ViewSet:
    """Maximally connected components (edge direction ignored), keyed ``"c<index>"``."""
    count, labels = component_labels(db)
    return _make_viewset(db, "component", [f"c{i}" for i in range(count)], labels, np.arange(len(db), dtype=np.int64))


def case_projection(db: CausalEventDatabase, relation: str | None = None) -> ViewSet:
    """Per key of ``relation``: the union of all fragments containing that key.

    Views are keyed by the root event id and ordered by it.
    """
    relation = relation or db.root
    if relation not in db.relations:
        raise ConfigError(f"unknown root relation {relation!r}")
    col = db.relations.index(relation)
    mat = db.tuples
    roots = mat[:, col] if len(mat) else np.empty(0, dtype=np.int64)
    has = roots >= 0
    mat, roots = mat[has], roots[has]
    uroots, view_of_frag = np.unique(roots, return_inverse=True)
    rows = np.repeat(view_of_frag.astype(np.int64), mat.shape[1])
    ev = mat.ravel()
    keep = ev >= 0
    return _make_viewset(db, "case", db.ids[uroots].tolist(), rows[keep], ev[keep])


# -- per-event functions ----------------------------------------------------

def preset(graph, eid: str) -> set[str]:
    return graph.preset(eid)


def postset(graph, eid: str) -> set[str]:
    return graph.postset(eid)


def batching_mask(db: CausalEventDatabase, root: str | None = None) -> np.ndarray:
    """Boolean per event: member of fragments with at least two distinct root keys."""
    root = root or db.root
    col = db.relations.index(root)
    mat = db.tuples
    n = len(db)
    if len(mat) == 0:
        return np.zeros(n, dtype=bool)
    roots = np.repeat(mat[:, col], mat.shape[1])
    ev = mat.ravel()
    keep = (ev >= 0) & (roots >= 0)
    pairs = np.unique(ev[keep] * max(n, 1) + roots[keep])
    counts = np.bincount(pairs // max(n, 1), minlength=n)
    return counts >= 2


def batching_events(graph, root: str | None = None) -> set[str]:
    """Events shared by fragments of distinct root keys.

    For a view, sharing is judged on the whole database and the result is
    restricted to the view's events.
    """
    db = graph.db
    mask = batching_mask(db, root)
    ev = graph.events
    return set(db.ids[ev[mask[ev]]].tolist())


def cycle_times(graph) -> np.ndarray:
    """Cycle time of every event of ``graph`` (aligned with ``graph.events``).

    Gap to the latest predecessor that is not later than the event; 0 when
    no such predecessor exists.
    """
    db = graph.db
    ev = graph.events
    t = db.timestamps
    src, dst = graph.src, graph.dst
    ok = t[src] <= t[dst]
    latest = np.full(len(db), np.iinfo(np.int64).min, dtype=np.int64)
    np.maximum.at(latest, dst[ok], t[src[ok]])
    lat = latest[ev]
    return np.where(lat == np.iinfo(np.int64).min, 0, t[ev] - lat)


def cycle_time(eid: str, graph) -> int:
    db = graph.db
    i = db.index_of(eid)
    t = db.timestamps
    preds = graph.src[graph.dst == i]
    earlier = t[preds][t[preds] <= t[i]]
    return int(t[i] - earlier.max()) if len(earlier) else 0
