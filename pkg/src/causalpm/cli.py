"""Command-line driver: generate | build | aggregate | kpi | violations | compare | export."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import aceg as A
from . import analysis as K
from . import export as X
from .catalog import left_outer_join, load_catalog
from .ceg import CausalEventDatabase, build_ceg_db, case_projection, components, fragments
from .config import RunConfig, load_run_config
from .cpt import CausalProcessTemplate, default_cpt, parse_cpt, require_valid
from .errors import CausalPMError, ConfigError
from .generate import GeneratorConfig, generate, write_dataset

log = logging.getLogger("causalpm")
ARTIFACT = "ceg.json"


# -- pipeline -------------------------------------------------------------------

def build_database(cfg: RunConfig, root: str | None = None):
    """load -> join -> validate template -> build. Returns (db, cpt, report)."""
    schema = dict(cfg.source)
    schema.setdefault("dir", ".")
    schema["dir"] = str(cfg.base_dir / schema["dir"])
    catalog, instances = load_catalog(None, schema)
    root = root or cfg.root or catalog.root
    cpt = parse_cpt(cfg.cpt, catalog) if cfg.cpt is not None else default_cpt(catalog, root=root)
    report = require_valid(cpt, catalog)
    for issue in report.warnings:
        log.warning("%s", issue.message)
    join = left_outer_join(catalog, instances, list(cpt.relations), root)
    return build_ceg_db(join, cpt, instances, root), cpt, report


def _database(cfg: RunConfig, out: Path) -> CausalEventDatabase:
    """Read the build artifact, building it first when absent."""
    path = out / ARTIFACT
    if path.exists():
        return X.load_database(path)
    db, _, _ = build_database(cfg)
    X.save_database(db, path)
    return db


def _template(cfg: RunConfig, db: CausalEventDatabase):
    if cfg.cpt is not None:
        return parse_cpt(cfg.cpt)
    return CausalProcessTemplate(db.relations, frozenset(map(tuple, db.causal_pairs)))


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _summary(db: CausalEventDatabase, root: str | None = None) -> str:
    return (
        f"{len(db)} events, {db.n_edges} edges, {db.n_fragments} fragments, "
        f"{len(components(db))} components, {len(case_projection(db, root))} projections"
    )


# -- commands -------------------------------------------------------------------

def cmd_generate(args) -> int:
    doc = {}
    if args.config:
        doc = load_run_config(args.config).generator
    gcfg = GeneratorConfig.from_dict(doc)
    if args.orders is not None:
        gcfg.orders = args.orders
        gcfg.check()
    out = Path(args.out or "data")
    data = generate(gcfg, seed=args.seed)
    write_dataset(data, out)
    rows = sum(data.manifest["rows"].values())
    print(f"wrote {rows} rows in {len(data.tables)} tables to {out} ({data.manifest['anomalies_injected']} anomalies)")
    return 0


def cmd_build(args) -> int:
    cfg = load_run_config(args.config)
    db, _, _ = build_database(cfg, args.root)
    out = cfg.output_dir(args.out)
    X.save_database(db, out / ARTIFACT)
    print(_summary(db, args.root))
    return 0


def cmd_aggregate(args) -> int:
    cfg = load_run_config(args.config)
    out = cfg.output_dir(args.out)
    db = _database(cfg, out)
    views = case_projection(db, args.root)
    fmt = args.format or cfg.format
    if args.level == 1:
        acegs = A.aggregate_level1(views)
    elif args.level == 2:
        acegs = A.aggregate_level2(views)
    else:
        acegs = [A.aggregate_level3(views)]
    violations = K.violation_counts(db)
    for i, ag in enumerate(acegs, start=1):
        name = f"aceg_l{args.level}_{i}"
        if fmt == "dot":
            text = X.aceg_to_dot(ag, violations, terminals=True, name=name)
        elif fmt == "csv":
            text = X.aceg_to_csv(ag)
        else:
            text = X.aceg_to_json(ag)
        _write(out / f"{name}.{fmt}", text)
    print(f"level {args.level}: {len(acegs)} aggregated graph(s) written to {out}")
    return 0


def kpi_report(db: CausalEventDatabase, root: str | None = None) -> dict:
    views = case_projection(db, root)
    level3 = A.aggregate_level3(views)
    return {
        "event_types": {t: K.event_type_cycle_stats(views, t).to_dict() for t in db.types},
        "ceg_cycle_time": K.ceg_cycle_stats(views).to_dict(),
        "fragment_cycle_time": K.fragment_cycle_stats(fragments(db)).to_dict(),
        "end_events": {k: {"absolute": a, "relative": r} for k, (a, r) in K.end_event_distribution(level3).items()},
        "batching_types": {k: {"absolute": a, "relative": r} for k, (a, r) in K.batching_type_distribution(db, root).items()},
    }


def cmd_kpi(args) -> int:
    cfg = load_run_config(args.config)
    out = cfg.output_dir(args.out)
    db = _database(cfg, out)
    report = kpi_report(db, args.root)
    _write(out / "kpi.json", json.dumps(report, indent=2) + "\n")
    c = report["ceg_cycle_time"]
    print(f"{c['count']} cases, cycle time min/avg/max (us): {c['min']} / {c['avg']} / {c['max']}")
    return 0


def cmd_violations(args) -> int:
    cfg = load_run_config(args.config)
    out = cfg.output_dir(args.out)
    db = _database(cfg, out)
    found = K.temporal_violations(db)
    _write(out / "violations.csv", X.violations_to_csv(found))
    print(f"{len(found)} temporal violation(s)")
    return 0


def compare_report(db: CausalEventDatabase, cpt, root: str | None = None):
    expected = K.expected_type_edges(cpt, db.labels)
    dfg = K.mine_dfg(K.flatten_to_event_log(db, root))
    level3 = A.aggregate_level3(case_projection(db, root))
    dfg_table = K.conformance_table(dfg, expected)
    aceg_table = K.conformance_table(level3, expected, K.violation_counts(db))
    return dfg, level3, dfg_table, aceg_table


def cmd_compare(args) -> int:
    cfg = load_run_config(args.config)
    out = cfg.output_dir(args.out)
    db = _database(cfg, out)
    _, _, dfg_table, aceg_table = compare_report(db, _template(cfg, db), args.root)
    _write(out / "conformance_dfg.csv", X.conformance_to_csv(dfg_table))
    _write(out / "conformance_aceg.csv", X.conformance_to_csv(aceg_table))
    scores = {"dfg": dfg_table.score, "aceg": aceg_table.score}
    _write(out / "compare.json", json.dumps(scores, indent=2) + "\n")
    print(f"conformance score: DFG {scores['dfg']}, ACEG {scores['aceg']}")
    return 0


def cmd_export(args) -> int:
    cfg = load_run_config(args.config)
    out = cfg.output_dir(args.out)
    db = _database(cfg, out)
    graph = db
    if args.case is not None:
        views = case_projection(db, args.root)
        if args.case not in views.keys:
            raise ConfigError(f"no case {args.case!r}; case ids are root event ids such as {views.keys[0]!r}")
        graph = views.by_key(args.case)
    fmt = args.format or cfg.format
    if fmt == "dot":
        path = _write(out / "ceg.dot", X.ceg_to_dot(graph, cfg.thresholds))
    elif fmt == "csv":
        path = _write(out / "events.csv", X.events_to_csv(graph))
        _write(out / "edges.csv", X.edges_to_csv(graph))
    else:
        path = out / ARTIFACT
        if args.case is not None:
            raise ConfigError("json export covers the whole database; drop --case or use --format dot/csv")
    print(f"exported {graph.n_events} events, {graph.n_edges} edges to {path}")
    return 0


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalpm", description="Causal event graphs from relational data.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="run configuration JSON")
        sp.add_argument("--out", help="output directory (default: config output.dir)")
        sp.add_argument("--root", help="relation whose keys identify cases")

    g = sub.add_parser("generate", help="write a synthetic order-to-cash dataset")
    common(g, config_required=False)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--orders", type=int, help="override generator.orders")
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("build", help="build and store the causal event database")
    common(b)
    b.set_defaults(func=cmd_build)

    a = sub.add_parser("aggregate", help="aggregated graphs at level 1, 2 or 3")
    common(a)
    a.add_argument("--level", type=int, choices=(1, 2, 3), required=True)
    a.add_argument("--format", choices=("dot", "json", "csv"))
    a.set_defaults(func=cmd_aggregate)

    for name, func, text in (
        ("kpi", cmd_kpi, "cycle times and distributions"),
        ("violations", cmd_violations, "temporal violations as CSV"),
        ("compare", cmd_compare, "conformance of the DFG baseline vs the aggregated graph"),
    ):
        s = sub.add_parser(name, help=text)
        common(s)
        s.set_defaults(func=func)

    e = sub.add_parser("export", help="export the event graph")
    common(e)
    e.add_argument("--format", choices=("dot", "json", "csv"))
    e.add_argument("--case", help="export a single case projection by root event id")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CausalPMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
