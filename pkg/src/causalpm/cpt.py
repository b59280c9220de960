"""Causal process templates: a strict partial order over the selected relations."""
from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .catalog import Catalog, join_plan
from .errors import ConfigError, ValidationError
from .report import Report

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CausalProcessTemplate:
    """Relations plus the direct ("covering") causal edges between them.

    ``removed`` keeps the transitive edges dropped while parsing. With
    ``use_closure`` set, :meth:`causal_pairs` returns the transitive closure
    instead of the covering edges.
    """

    relations: tuple[str, ...]
    edges: frozenset = frozenset()
    removed: frozenset = field(default=frozenset(), compare=False)
    use_closure: bool = False

    def children(self, relation: str) -> list[str]:
        return sorted(b for a, b in self.edges if a == relation)

    def parents(self, relation: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == relation)

    def sources(self) -> list[str]:
        targets = {b for _, b in self.edges}
        return [r for r in self.relations if r not in targets]

    def sinks(self) -> list[str]:
        origins = {a for a, _ in self.edges}
        return [r for r in self.relations if r not in origins]

    def find_cycle(self) -> list[str] | None:
        return _find_cycle(self.relations, self.edges)

    def is_partial_order(self) -> bool:
        return self.find_cycle() is None

    def topological_order(self) -> list[str]:
        """Kahn's algorithm with name order as tiebreak."""
        order = _topological(self.relations, self.edges)
        if order is None:
            raise ValidationError(f"causal process template has a cycle: {self.find_cycle()}")
        return order

    def closure(self) -> set[tuple[str, str]]:
        return _closure(self.relations, self.edges)

    def causal_pairs(self) -> set[tuple[str, str]]:
        return self.closure() if self.use_closure else set(self.edges)

    def to_dict(self) -> dict:
        return {
            "relations": list(self.relations),
            "edges": [{"from": a, "to": b} for a, b in sorted(self.edges)],
        }


def _successors(edges) -> dict:
    succ: dict[str, list[str]] = {}
    for a, b in sorted(edges):
        succ.setdefault(a, []).append(b)
    return succ


def _topological(relations, edges) -> list[str] | None:
    indeg = {r: 0 for r in relations}
    for _, b in edges:
        indeg[b] = indeg.get(b, 0) + 1
    succ = _successors(edges)
    heap = [r for r, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        r = heapq.heappop(heap)
        order.append(r)
        for s in succ.get(r, ()):
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, s)
    return order if len(order) == len(indeg) else None


def _find_cycle(relations, edges) -> list[str] | None:
    succ = _successors(edges)
    state: dict[str, int] = {}
    nodes = sorted(set(relations) | {a for a, _ in edges} | {b for _, b in edges})
    for start in nodes:
        if state.get(start):
            continue
        stack = [(start, iter(succ.get(start, ())))]
        path = [start]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                path.pop()
            elif state.get(nxt) == 1:
                cycle = path[path.index(nxt):]
                i = cycle.index(min(cycle))
                return cycle[i:] + cycle[:i]
            elif not state.get(nxt):
                state[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
    return None


def _closure(relations, edges) -> set[tuple[str, str]]:
    succ = _successors(edges)
    out = set()
    for r in set(relations) | {a for a, _ in edges}:
        seen, todo = set(), list(succ.get(r, ()))
        while todo:
            x = todo.pop()
            if x in seen:
                continue
            seen.add(x)
            todo.extend(succ.get(x, ()))
        out.update((r, x) for x in seen)
    return out


def transitive_reduction(relations, edges) -> tuple[frozenset, frozenset]:
    """Split acyclic ``edges`` into (covering edges, transitive edges)."""
    edges = set(edges)
    succ = _successors(edges)
    transitive = set()
    for a, b in edges:
        # b reachable from a through some other child?
        todo = [c for c in succ.get(a, ()) if c != b]
        seen = set()
        while todo:
            x = todo.pop()
            if x == b:
                transitive.add((a, b))
                break
            if x in seen:
                continue
            seen.add(x)
            todo.extend(succ.get(x, ()))
    return frozenset(edges - transitive), frozenset(transitive)


def _load(document):
    if isinstance(document, Mapping):
        return document
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith(("{", "["))):
        path = Path(document)
        if not path.exists():
            raise ConfigError(f"template file not found: {path}")
        text, where = path.read_text(), str(path)
    else:
        text, where = document, "<template>"
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return doc.get("cpt", doc) if isinstance(doc, dict) else doc


def parse_cpt(document, catalog: Catalog | None = None, use_closure: bool = False) -> CausalProcessTemplate:
    """Parse a template document ``{"relations": [...], "edges": [{"from", "to"}]}``.

    Cycles are accepted here and reported by :func:`validate_cpt`. On an
    acyclic template, edges implied by transitivity are dropped with a warning.
    """
    doc = _load(document)
    if not isinstance(doc, Mapping):
        raise ConfigError("cpt: expected an object with 'relations' and 'edges'")
    relations = doc.get("relations")
    if not isinstance(relations, list) or not all(isinstance(r, str) for r in relations):
        raise ConfigError("cpt.relations: expected a list of relation names")
    if len(set(relations)) != len(relations):
        raise ConfigError("cpt.relations: duplicate relation name")
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise ConfigError("cpt.edges: expected a list")
    edges = set()
    for i, e in enumerate(raw_edges):
        if isinstance(e, Mapping):
            if "from" not in e or "to" not in e:
                raise ConfigError(f"cpt.edges[{i}]: needs 'from' and 'to'")
            a, b = e["from"], e["to"]
        elif isinstance(e, (list, tuple)) and len(e) == 2:
            a, b = e
        else:
            raise ConfigError(f"cpt.edges[{i}]: expected {{'from': ..., 'to': ...}}")
        for end in (a, b):
            if end not in relations:
                raise ConfigError(f"cpt.edges[{i}]: unknown relation {end!r}")
        if a == b:
            raise ConfigError(f"cpt.edges[{i}]: self-edge on {a!r} is not a strict order")
        edges.add((a, b))
    if catalog is not None:
        for r in relations:
            if r not in catalog:
                raise ConfigError(f"cpt.relations: unknown relation {r!r}")
    removed = frozenset()
    if _find_cycle(relations, edges) is None:
        kept, removed = transitive_reduction(relations, edges)
        for a, b in sorted(removed):
            log.warning("cpt edge %s -> %s is implied by transitivity; removed", a, b)
        edges = kept
    return CausalProcessTemplate(tuple(relations), frozenset(edges), removed, use_closure)


def default_cpt(catalog: Catalog, relations: Iterable[str] | None = None, root: str | None = None) -> CausalProcessTemplate:
    """Template derived from the foreign keys, oriented away from the root relation."""
    relations = list(relations) if relations is not None else catalog.names
    root = root or catalog.root or relations[0]
    plan = join_plan(catalog, relations, root)
    return CausalProcessTemplate(tuple(relations), frozenset((s.parent, s.child) for s in plan))


def _fk_reachable(catalog: Catalog) -> dict[str, set[str]]:
    succ = {}
    for fk in catalog.foreign_keys:
        succ.setdefault(fk.relation, set()).add(fk.references)
    reach = {}
    for r in catalog.names:
        seen, todo = set(), list(succ.get(r, ()))
        while todo:
            x = todo.pop()
            if x not in seen:
                seen.add(x)
                todo.extend(succ.get(x, ()))
        reach[r] = seen
    return reach


def validate_cpt(cpt: CausalProcessTemplate, catalog: Catalog) -> Report:
    """Report cycles, unknown or timestamp-less relations, and edges no foreign key backs.

    An edge counts as backed when one endpoint reaches the other by following
    foreign-key references; unbacked edges are warnings only, since a template
    may rewire the schema on purpose.
    """
    report = Report()
    cycle = cpt.find_cycle()
    if cycle is not None:
        report.add("cycle", f"template is not a partial order, cycle {cycle}", tuple(cycle))
    for r in cpt.relations:
        if r not in catalog:
            report.add("unknown-relation", f"{r!r} is not in the catalog", (r,))
        elif catalog[r].timestamp is None:
            report.add("missing-timestamp", f"{r!r} has no timestamp attribute", (r,))
    reach = _fk_reachable(catalog)
    for a, b in sorted(cpt.edges):
        if a in catalog and b in catalog and b not in reach[a] and a not in reach[b]:
            report.add("edge-not-fk-backed", f"edge {a} -> {b} not backed by foreign key", (a, b), "warning")
    if len(cpt.relations) > 1:
        touched = {a for a, _ in cpt.edges} | {b for _, b in cpt.edges}
        for r in cpt.relations:
            if r not in touched:
                report.add("disconnected", f"{r!r} takes part in no template edge", (r,), "warning")
    for a, b in sorted(cpt.removed):
        report.add("transitive-edge", f"edge {a} -> {b} was implied by transitivity and removed", (a, b), "warning")
    return report


def require_valid(cpt: CausalProcessTemplate, catalog: Catalog) -> Report:
    """Validate and raise ValidationError on any error-level issue."""
    report = validate_cpt(cpt, catalog)
    if not report.ok:
        raise ValidationError("; ".join(i.message for i in report.errors), report)
    return report
