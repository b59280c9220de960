"""Relational source model: schemas, table instances and the left outer join.

Tables are loaded from delimited text files (one per relation, header row),
from in-memory data frames, or from a ``sqlite3`` connection. Primary keys
are kept as strings; identifier types are namespaced by relation name
(``id:<relation>``) so keys of different tables never collide.
"""
from __future__ import annotations

import json
import logging
import sqlite3
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError
from .report import Report

log = logging.getLogger(__name__)

ID_PREFIX = "id:"
TIMESTAMP_TYPE = "timestamp"


def id_type(relation: str) -> str:
    return ID_PREFIX + relation


def is_id_type(attr_type: str) -> bool:
    return attr_type.startswith(ID_PREFIX)


@dataclass(frozen=True)
class ForeignKey:
    relation: str
    column: str
    references: str


@dataclass(frozen=True)
class RelationSchema:
    """A relation name plus its ordered ``(attribute, type)`` pairs.

    The first attribute is the primary key.
    """

    name: str
    attrs: tuple[tuple[str, str], ...]
    timestamp: str | None = None
    label: str | None = None

    @property
    def id_attr(self) -> str:
        return self.attrs[0][0]

    @property
    def id_type(self) -> str:
        return self.attrs[0][1]

    @property
    def display_label(self) -> str:
        return self.label or self.name

    def attr_type(self, attr: str) -> str | None:
        for name, typ in self.attrs:
            if name == attr:
                return typ
        return None


class Catalog:
    """A set of relation schemas connected by foreign keys."""

    def __init__(self, schemas: Iterable[RelationSchema], foreign_keys: Iterable[ForeignKey] = (), root: str | None = None):
        self.schemas: dict[str, RelationSchema] = {}
        for s in schemas:
            if s.name in self.schemas:
                raise ConfigError(f"relation {s.name!r} declared twice")
            self.schemas[s.name] = s
        self.foreign_keys: tuple[ForeignKey, ...] = tuple(foreign_keys)
        self.root = root

    def __contains__(self, name):
        return name in self.schemas

    def __getitem__(self, name) -> RelationSchema:
        try:
            return self.schemas[name]
        except KeyError:
            raise ConfigError(f"unknown relation {name!r}") from None

    def __iter__(self):
        return iter(self.schemas.values())

    def __len__(self):
        return len(self.schemas)

    @property
    def names(self) -> list[str]:
        return list(self.schemas)

    def label(self, name: str) -> str:
        return self[name].display_label

    def fks_within(self, relations: Iterable[str]) -> list[ForeignKey]:
        rel = set(relations)
        return [fk for fk in self.foreign_keys if fk.relation in rel and fk.references in rel]

    def fks_of(self, relation: str) -> list[ForeignKey]:
        return [fk for fk in self.foreign_keys if fk.relation == relation]


@dataclass
class RelationInstance:
    """Rows of one relation.

    ``frame`` holds the primary key column (str), the timestamp column as
    integer microseconds since the epoch, foreign-key columns (str or None)
    and any extra columns untouched.
    """

    schema: RelationSchema
    frame: pd.DataFrame

    def __len__(self):
        return len(self.frame)

    @property
    def keys(self) -> pd.Series:
        return self.frame[self.schema.id_attr]

    def timestamps(self) -> pd.Series:
        """Timestamps indexed by primary key."""
        return pd.Series(
            self.frame[self.schema.timestamp].to_numpy(np.int64),
            index=self.frame[self.schema.id_attr].to_numpy(),
        )


@dataclass(frozen=True)
class CausallyConnectedTuple:
    """One joined row, reduced to its non-null ``(relation, key)`` pairs."""

    pairs: frozenset

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("a causally connected tuple needs at least one (relation, key) pair")
        rels = [r for r, _ in self.pairs]
        if len(rels) != len(set(rels)):
            raise ValueError(f"more than one key per relation in {sorted(self.pairs)}")

    @classmethod
    def of(cls, mapping: Mapping[str, str | None]) -> "CausallyConnectedTuple":
        return cls(frozenset((r, k) for r, k in mapping.items() if k is not None))

    def get(self, relation: str) -> str | None:
        for r, k in self.pairs:
            if r == relation:
                return k
        return None

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)


def pk_pairs(t: CausallyConnectedTuple) -> set[tuple[str, str]]:
    return set(t.pairs)


# -- schema config ----------------------------------------------------------

def _read_document(doc) -> tuple[dict, Path | None]:
    # a full project config nests the schema under "source"
    if isinstance(doc, Mapping):
        doc = dict(doc)
        return dict(doc.get("source", doc)), None
    path = Path(doc)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        loaded = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if isinstance(loaded, Mapping) and "source" in loaded:
        loaded = loaded["source"]
    if not isinstance(loaded, Mapping):
        raise ConfigError(f"{path}: expected a JSON object")
    return dict(loaded), path.parent


def _table_config(name: str, conf) -> dict:
    if not isinstance(conf, Mapping):
        raise ConfigError(f"tables.{name}: expected an object")
    for key in ("pk", "timestamp"):
        if key not in conf:
            raise ConfigError(f"tables.{name}: missing {key!r}")
    fks = conf.get("fks", [])
    if not isinstance(fks, list):
        raise ConfigError(f"tables.{name}.fks: expected a list")
    for i, fk in enumerate(fks):
        if not isinstance(fk, Mapping) or "column" not in fk or "references" not in fk:
            raise ConfigError(f"tables.{name}.fks[{i}]: needs 'column' and 'references'")
    return dict(conf)


def catalog_from_config(schema_config) -> Catalog:
    """Build the catalog (schemas only, no data) from a schema-config document."""
    doc, _ = _read_document(schema_config)
    tables = doc.get("tables")
    if not isinstance(tables, Mapping) or not tables:
        raise ConfigError("schema config needs a non-empty 'tables' object")
    schemas, fks = [], []
    for name, raw in tables.items():
        conf = _table_config(name, raw)
        attrs = [(conf["pk"], id_type(name)), (conf["timestamp"], TIMESTAMP_TYPE)]
        for fk in conf.get("fks", []):
            attrs.append((fk["column"], id_type(fk["references"])))
            fks.append(ForeignKey(name, fk["column"], fk["references"]))
        for extra in conf.get("attrs", []):
            attrs.append((extra, "str"))
        schemas.append(RelationSchema(name, tuple(attrs), conf["timestamp"], conf.get("label")))
    root = doc.get("root")
    if root is not None and root not in tables:
        raise ConfigError(f"root relation {root!r} is not a configured table")
    return Catalog(schemas, fks, root=root)


def _parse_timestamps(raw: pd.Series, relation: str, column: str, keys: pd.Series, fmt: str) -> np.ndarray:
    if fmt == "int":
        parsed = pd.to_numeric(raw, errors="coerce")
        bad = parsed.isna() | (parsed != parsed.round())
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataError(f"{relation} row {keys.iloc[i]!r} column {column!r}: unparseable timestamp {raw.iloc[i]!r}")
        return parsed.to_numpy(np.int64)
    dt = pd.to_datetime(raw, format="ISO8601", utc=True, errors="coerce")
    bad = dt.isna().to_numpy()
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(f"{relation} row {keys.iloc[i]!r} column {column!r}: unparseable timestamp {raw.iloc[i]!r}")
    return dt.dt.tz_convert(None).to_numpy().astype("datetime64[us]").astype(np.int64)


def _fetch_table(source, name: str, conf: dict, base_dir: Path | None) -> pd.DataFrame:
    if isinstance(source, Mapping):
        if name not in source:
            raise ConfigError(f"table {name!r} missing from source")
        df = source[name]
        return df.astype(object).where(df.notna(), "").astype(str)
    if isinstance(source, sqlite3.Connection):
        table = conf.get("table", name)
        try:
            df = pd.read_sql_query(f'SELECT * FROM "{table}"', source)
        except Exception as exc:
            raise ConfigError(f"table {table!r}: {exc}") from exc
        return df.astype(object).where(df.notna(), "").astype(str)
    directory = Path(source) if source is not None else base_dir
    if directory is None:
        raise ConfigError("no source directory given")
    path = directory / conf.get("file", f"{name}.csv")
    if not path.exists():
        raise ConfigError(f"table {name!r}: file not found: {path}")
    return pd.read_csv(path, dtype=str, keep_default_na=False, sep=conf.get("sep", ","))


def load_catalog(source, schema_config) -> tuple[Catalog, dict[str, RelationInstance]]:
    """Load every configured table and check keys and references.

    Parameters
    ----------
    source
        Directory of delimited files, a mapping ``name -> DataFrame`` or a
        ``sqlite3.Connection``. ``None`` uses the config file's directory
        (or its ``"dir"`` entry).
    schema_config
        Path to, or contents of, the schema-config JSON document.

    Returns
    -------
    (Catalog, dict of RelationInstance keyed by relation name)
    """
    doc, base_dir = _read_document(schema_config)
    catalog = catalog_from_config(doc)
    if source is None and doc.get("dir") is not None:
        source = (base_dir or Path(".")) / doc["dir"]
    instances: dict[str, RelationInstance] = {}
    for name, raw_conf in doc["tables"].items():
        conf = _table_config(name, raw_conf)
        schema = catalog[name]
        df = _fetch_table(source, name, conf, base_dir)
        fk_cols = [fk["column"] for fk in conf.get("fks", [])]
        needed = [conf["pk"], conf["timestamp"], *fk_cols]
        missing = [c for c in needed if c not in df.columns]
        if missing:
            raise ConfigError(f"table {name!r}: missing column(s) {missing}")
        df = df.copy()
        keys = df[conf["pk"]].astype(str)
        if (keys == "").any():
            i = int(np.flatnonzero((keys == "").to_numpy())[0])
            raise DataError(f"{name} row {i}: empty primary key")
        dup = keys.duplicated()
        if dup.any():
            raise DataError(f"{name}: duplicate primary key {keys[dup].iloc[0]!r}")
        df[conf["pk"]] = keys
        df[conf["timestamp"]] = _parse_timestamps(
            df[conf["timestamp"]], name, conf["timestamp"], keys, conf.get("timestamp_format", "iso")
        )
        for col in fk_cols:
            df[col] = df[col].astype(object).where(df[col] != "", None)
        instances[name] = RelationInstance(schema, df.reset_index(drop=True))
        log.info("loaded %s: %d rows", name, len(df))
    check_references(catalog, instances)
    return catalog, instances


def check_references(catalog: Catalog, instances: Mapping[str, RelationInstance]) -> None:
    """Raise DataError on the first non-null foreign key with no matching row."""
    for fk in catalog.foreign_keys:
        if fk.relation not in instances or fk.references not in instances:
            continue
        inst = instances[fk.relation]
        values = inst.frame[fk.column]
        present = values.notna()
        known = instances[fk.references].keys
        dangling = present & ~values.isin(known)
        if dangling.any():
            i = int(np.flatnonzero(dangling.to_numpy())[0])
            raise DataError(
                f"{fk.relation} row {inst.keys.iloc[i]!r}: {fk.column}={values.iloc[i]!r} "
                f"not found in {fk.references}"
            )


def validate_catalog(catalog: Catalog) -> Report:
    """Check the relational-schema rules; never raises."""
    report = Report()
    id_types = {s.id_type: [] for s in catalog}
    for s in catalog:
        if not s.attrs:
            report.add("empty-schema", f"{s.name} has no attributes", (s.name,))
            continue
        if not is_id_type(s.id_type):
            report.add("pk-not-identifier", f"{s.name}.{s.id_attr} has non-identifier type {s.id_type!r}", (s.name,))
        id_types[s.id_type].append(s.name)
        if s.timestamp is not None and s.attr_type(s.timestamp) is None:
            report.add("missing-timestamp-attr", f"{s.name}: timestamp attribute {s.timestamp!r} not in attrs", (s.name,))
    for typ, names in id_types.items():
        if is_id_type(typ) and len(names) > 1:
            report.add("shared-id-type", f"relations {sorted(names)} share identifier type {typ!r}", tuple(sorted(names)))
    owners = {s.id_type: s.name for s in catalog if s.attrs}
    dangling = set()
    for s in catalog:
        for attr, typ in s.attrs[1:]:
            if is_id_type(typ) and typ not in owners:
                dangling.add((s.name, attr))
    for fk in catalog.foreign_keys:
        if fk.relation not in catalog:
            report.add("unknown-relation", f"foreign key declared on unknown relation {fk.relation!r}", (fk.relation,))
            continue
        typ = catalog[fk.relation].attr_type(fk.column)
        if typ is None:
            report.add("unknown-column", f"{fk.relation}.{fk.column} is not an attribute", (fk.relation, fk.column))
        if fk.references not in catalog:
            dangling.add((fk.relation, fk.column))
        elif typ is not None and typ != catalog[fk.references].id_type:
            report.add(
                "fk-type-mismatch",
                f"{fk.relation}.{fk.column} has type {typ!r}, {fk.references} keys are {catalog[fk.references].id_type!r}",
                (fk.relation, fk.column),
            )
    for rel, col in sorted(dangling):
        report.add("dangling-foreign-key", f"{rel}.{col} references a relation outside the catalog", (rel, col))
    return report


# -- join -------------------------------------------------------------------

@dataclass(frozen=True)
class JoinStep:
    parent: str
    child: str
    fk: ForeignKey

    @property
    def fans_out(self) -> bool:
        """True when the child rows reference the parent (one parent row, many child rows)."""
        return self.fk.relation == self.child


def join_plan(catalog: Catalog, relations: Iterable[str], root: str) -> list[JoinStep]:
    """Breadth-first spanning tree over the foreign keys restricted to ``relations``.

    Neighbours are visited in sorted order so the plan is deterministic.
    """
    rels = list(dict.fromkeys(relations))
    if len(rels) < 2:
        raise ConfigError(f"a join needs at least two relations, got {rels}")
    for r in rels:
        if r not in catalog:
            raise ConfigError(f"unknown relation {r!r}")
        if catalog[r].timestamp is None:
            raise ConfigError(f"relation {r!r} has no timestamp attribute")
    if root not in rels:
        raise ConfigError(f"root relation {root!r} is not among the joined relations")
    fks = sorted(catalog.fks_within(rels), key=lambda fk: (fk.relation, fk.column))
    seen = {root}
    plan = []
    queue = deque([root])
    while queue:
        cur = queue.popleft()
        for fk in fks:
            if fk.references == cur and fk.relation not in seen:
                nxt = fk.relation
            elif fk.relation == cur and fk.references not in seen:
                nxt = fk.references
            else:
                continue
            seen.add(nxt)
            plan.append(JoinStep(cur, nxt, fk))
            queue.append(nxt)
    unreached = [r for r in rels if r not in seen]
    if unreached:
        raise ConfigError(f"relation {unreached[0]!r} is not connected to {root!r} via foreign keys")
    return plan


@dataclass
class JoinResult:
    """The joined relation: one column of primary keys (or None) per relation."""

    frame: pd.DataFrame
    relations: tuple[str, ...]
    root: str

    def __len__(self):
        return len(self.frame)

    def __iter__(self) -> Iterator[CausallyConnectedTuple]:
        cols = [self.frame[r].to_numpy() for r in self.relations]
        for row in zip(*cols):
            yield CausallyConnectedTuple(frozenset((r, k) for r, k in zip(self.relations, row) if k is not None))

    def tuples(self) -> set[CausallyConnectedTuple]:
        return set(self)

    @classmethod
    def from_tuples(cls, tuples: Iterable[CausallyConnectedTuple], relations: Iterable[str], root: str) -> "JoinResult":
        relations = tuple(relations)
        rows = [tuple(t.get(r) for r in relations) for t in set(tuples)]
        frame = pd.DataFrame(rows, columns=list(relations), dtype=object)
        return cls(_canonical(frame, relations), relations, root)


def _canonical(frame: pd.DataFrame, relations: tuple[str, ...]) -> pd.DataFrame:
    frame = frame[list(relations)].astype(object)
    frame = frame.where(frame.notna(), None)
    frame = frame.drop_duplicates()
    if len(frame):
        frame = frame.sort_values(list(relations), na_position="first", kind="mergesort")
    return frame.reset_index(drop=True)


def left_outer_join(
    catalog: Catalog,
    instances: Mapping[str, RelationInstance],
    relations: Iterable[str] | None = None,
    root: str | None = None,
) -> JoinResult:
    """Left-outer-join the selected relations along their foreign keys.

    The plan is rooted at ``root`` (default: ``catalog.root``). Unmatched
    rows keep None for the relations they could not reach.
    """
    relations = list(relations) if relations is not None else catalog.names
    root = root or catalog.root or relations[0]
    plan = join_plan(catalog, relations, root)
    order = [root] + [s.child for s in plan]
    # fk columns a relation must carry so later many-to-one steps can use them
    carry = {r: [] for r in order}
    for s in plan:
        if not s.fans_out:
            carry[s.parent].append(s.fk.column)

    def side(rel):
        inst = instances[rel]
        pk = inst.schema.id_attr
        cols = [pk] + [c for c in carry[rel] if c != pk]
        df = inst.frame[cols].rename(columns={pk: rel, **{c: f"{rel}.{c}" for c in carry[rel]}})
        return df

    frame = side(root)
    for s in plan:
        right = side(s.child)
        if s.fans_out:
            col = s.fk.column
            keycol = instances[s.child].frame[col]
            right = right.assign(__key=keycol.to_numpy())
            right = right[right["__key"].notna()]
            right["__key"] = right["__key"].astype(object)
            frame[s.parent] = frame[s.parent].astype(object)
            frame = frame.merge(right, how="left", left_on=s.parent, right_on="__key").drop(columns="__key")
        else:
            left_key = f"{s.parent}.{s.fk.column}"
            frame[left_key] = frame[left_key].astype(object)
            frame = frame.merge(right, how="left", left_on=left_key, right_on=s.child)
    result = JoinResult(_canonical(frame, tuple(order)), tuple(order), root)
    log.info("joined %d relations into %d tuples", len(order), len(result))
    return result
