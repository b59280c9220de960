"""DOT, JSON and CSV exporters, and the on-disk database artifact."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .aceg import AggregatedCEG
from .analysis import TemporalViolation, view_cycle_times, violation_mask
from .ceg import CausalEventDatabase, as_viewset, cycle_times
from .errors import DataError

ARTIFACT_VERSION = 1
GREEN, ORANGE, RED = "green", "orange", "red"


def _q(s) -> str:
    """DOT double-quoted string."""
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


# -- database artifact ---------------------------------------------------------

def dump_database(db: CausalEventDatabase) -> str:
    """Serialise a database as one JSON document, one node/edge per line."""
    ptr, frags = db.membership_ptr()
    header = {
        "version": ARTIFACT_VERSION,
        "relations": list(db.relations),
        "labels": {r: db.labels[r] for r in db.relations},
        "root": db.root,
        "causal_pairs": [list(p) for p in db.causal_pairs],
        "n_fragments": int(db.n_fragments),
    }
    out = io.StringIO()
    out.write("{\n")
    for k, v in header.items():
        out.write(f"{json.dumps(k)}: {json.dumps(v, separators=(',', ':'))},\n")
    out.write('"nodes": [\n')
    ids, keys = db.ids.tolist(), db.keys.tolist()
    ts, rc, tc = db.timestamps.tolist(), db.rel_code.tolist(), db.type_code.tolist()
    ptr_l, frag_l = ptr.tolist(), frags.tolist()
    dumps = json.dumps
    for i in range(len(ids)):
        node = (
            '{"id":' + dumps(ids[i]) + ',"relation":' + dumps(db.relations[rc[i]]) + ',"key":' + dumps(keys[i])
            + ',"type":' + dumps(db.types[tc[i]]) + ',"timestamp":' + str(ts[i])
            + ',"fragments":[' + ",".join(map(str, frag_l[ptr_l[i]:ptr_l[i + 1]])) + "]}"
        )
        out.write(node + (",\n" if i + 1 < len(ids) else "\n"))
    out.write('],\n"edges": [\n')
    src, dst = db.src.tolist(), db.dst.tolist()
    for j in range(len(src)):
        out.write('{"source":' + dumps(ids[src[j]]) + ',"target":' + dumps(ids[dst[j]]) + "}" + (",\n" if j + 1 < len(src) else "\n"))
    out.write("]\n}\n")
    return out.getvalue()


def save_database(db: CausalEventDatabase, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_database(db))
    return path


def load_database(path) -> CausalEventDatabase:
    """Read back an artifact written by :func:`save_database`."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"database artifact not found: {path}; run 'build' first")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a database artifact ({exc.msg})") from exc
    try:
        relations = doc["relations"]
        code = {r: i for i, r in enumerate(relations)}
        nodes = doc["nodes"]
        ids = [n["id"] for n in nodes]
        index = {e: i for i, e in enumerate(ids)}
        rel_code = [code[n["relation"]] for n in nodes]
        tuples = np.full((doc["n_fragments"], len(relations)), -1, dtype=np.int64)
        for i, n in enumerate(nodes):
            for f in n["fragments"]:
                tuples[f, rel_code[i]] = i
        src = [index[e["source"]] for e in doc["edges"]]
        dst = [index[e["target"]] for e in doc["edges"]]
        return CausalEventDatabase(
            relations, doc["labels"], doc["root"], ids, rel_code, [n["key"] for n in nodes],
            [n["timestamp"] for n in nodes], src, dst, tuples, [tuple(p) for p in doc["causal_pairs"]],
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise DataError(f"{path}: malformed database artifact ({exc!r})") from exc


# -- DOT -----------------------------------------------------------------------

def traffic_light(values: np.ndarray, thresholds=None) -> list[str]:
    """green if <= t1, orange if <= t2, red otherwise; tertiles by default."""
    values = np.asarray(values, dtype=np.float64)
    if thresholds is None:
        if len(values) == 0:
            return []
        t1, t2 = np.quantile(values, [1 / 3, 2 / 3])
    else:
        t1, t2 = thresholds
    return [GREEN if v <= t1 else ORANGE if v <= t2 else RED for v in values]


def ceg_to_dot(graph, thresholds=None, name: str = "ceg") -> str:
    """Event graph with nodes coloured by cycle time and violating edges in red."""
    db = graph.db
    vs = as_viewset(graph) if not isinstance(graph, CausalEventDatabase) else None
    if vs is None:
        events, ct = graph.events, cycle_times(graph)
    else:
        events, ct = vs.ev_idx, view_cycle_times(vs)
    colors = traffic_light(ct, thresholds)
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;", '  node [shape=box, style=filled];']
    for e, c, t in zip(events, colors, ct):
        label = f"{db.ids[e]}\n{db.types[db.type_code[e]]}"
        lines.append(f"  {_q(db.ids[e])} [label={_q(label)}, fillcolor={c}, tooltip={_q(f'cycle time {int(t)}')}];")
    bad = violation_mask(graph)
    for s, d, v in zip(graph.src, graph.dst, bad):
        attr = " [color=red, penwidth=2]" if v else ""
        lines.append(f"  {_q(db.ids[s])} -> {_q(db.ids[d])}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def aceg_edge_label(aceg: AggregatedCEG, edge) -> str:
    i0, i1 = aceg.in_card[edge]
    o0, o1 = aceg.out_card[edge]
    return f"{i0}..{i1} : {o0}..{o1} ({aceg.edge_quantity[edge]})"


def aceg_to_dot(aceg: AggregatedCEG, violations=None, terminals: bool = False, name: str = "aceg") -> str:
    """Type graph; edges labelled "in_min..in_max : out_min..out_max (quantity)".

    ``violations`` maps type pairs to violation counts; such edges are red.
    """
    violations = violations or {}
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;", "  node [shape=ellipse];"]
    for t in aceg.types:
        label = aceg.labels.get(t, t) + "\n(" + str(aceg.node_quantity[t]) + ")"
        lines.append(f"  {_q(t)} [label={_q(label)}];")
    for e in aceg.edges:
        attr = f"label={_q(aceg_edge_label(aceg, e))}"
        if violations.get(e):
            attr += f", color=red, fontcolor=red, xlabel={_q(f'{violations[e]} violations')}"
        lines.append(f"  {_q(e[0])} -> {_q(e[1])} [{attr}];")
    if terminals:
        lines.append('  "Start" [shape=box]; "End" [shape=box];')
        for t, n in sorted(aceg.start_quantity.items()):
            lines.append(f'  "Start" -> {_q(t)} [label={_q(f"({n})")}, style=dashed];')
        for t, n in sorted(aceg.end_quantity.items()):
            lines.append(f'  {_q(t)} -> "End" [label={_q(f"({n})")}, style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dfg_to_dot(dfg, name: str = "dfg") -> str:
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    for a in dfg.activities:
        lines.append(f"  {_q(a)};")
    for (a, b), c in sorted(dfg.counts.items()):
        lines.append(f"  {_q(a)} -> {_q(b)} [label={_q(c)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- JSON / CSV ----------------------------------------------------------------

def aceg_to_dict(aceg: AggregatedCEG) -> dict:
    return {
        "sources": list(aceg.sources),
        "types": [{"id": t, "label": aceg.labels.get(t, t), "quantity": aceg.node_quantity[t]} for t in aceg.types],
        "edges": [
            {
                "from": a, "to": b, "quantity": aceg.edge_quantity[(a, b)],
                "in": list(aceg.in_card[(a, b)]), "out": list(aceg.out_card[(a, b)]),
            }
            for a, b in aceg.edges
        ],
        "start": dict(sorted(aceg.start_quantity.items())),
        "end": dict(sorted(aceg.end_quantity.items())),
    }


def aceg_to_json(aceg: AggregatedCEG) -> str:
    return json.dumps(aceg_to_dict(aceg), indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def aceg_to_csv(aceg: AggregatedCEG) -> str:
    rows = [
        (a, b, aceg.edge_quantity[(a, b)], *aceg.in_card[(a, b)], *aceg.out_card[(a, b)])
        for a, b in aceg.edges
    ]
    return _csv(["from", "to", "quantity", "in_min", "in_max", "out_min", "out_max"], rows)


def violations_to_csv(violations: list[TemporalViolation]) -> str:
    return _csv(
        ["cause", "effect", "cause_timestamp", "effect_timestamp"],
        [(v.cause, v.effect, v.cause_timestamp, v.effect_timestamp) for v in violations],
    )


def conformance_to_csv(table) -> str:
    return table.to_frame().to_csv(index=False, lineterminator="\n")


def events_to_csv(graph) -> str:
    db = graph.db
    ev = graph.events
    return _csv(
        ["id", "relation", "key", "type", "timestamp"],
        [(db.ids[i], db.relation_of(i), db.keys[i], db.types[db.type_code[i]], int(db.timestamps[i])) for i in ev],
    )


def edges_to_csv(graph) -> str:
    db = graph.db
    return _csv(["source", "target"], [(db.ids[s], db.ids[d]) for s, d in zip(graph.src, graph.dst)])
