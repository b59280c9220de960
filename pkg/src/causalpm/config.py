"""Run configuration: one JSON file with source, cpt, output, thresholds and generator sections."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class RunConfig:
    source: dict
    cpt: dict | None = None
    output: dict = field(default_factory=dict)
    thresholds: tuple[int, int] | None = None
    generator: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def root(self) -> str | None:
        return self.source.get("root")

    def output_dir(self, override: str | None = None) -> Path:
        if override:
            return Path(override)
        return self.base_dir / self.output.get("dir", "out")

    @property
    def format(self) -> str:
        return self.output.get("format", "json")


def _check_thresholds(raw) -> tuple[int, int] | None:
    if raw is None:
        return None
    if isinstance(raw, dict):
        raw = raw.get("cycle_time")
        if raw is None:
            return None
    if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(x, (int, float)) for x in raw)):
        raise ConfigError("thresholds.cycle_time: expected [t1, t2] in microseconds")
    t1, t2 = raw
    if not t1 < t2:
        raise ConfigError(f"thresholds.cycle_time: must be strictly increasing, got {raw}")
    return int(t1), int(t2)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    source = doc.get("source")
    if source is None and "tables" in doc:
        source = {k: doc[k] for k in ("tables", "root", "dir") if k in doc}
    if source is not None and not isinstance(source, dict):
        raise ConfigError(f"{path}: 'source' must be an object")
    output = doc.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError(f"{path}: 'output' must be an object")
    fmt = output.get("format", "json")
    if fmt not in ("dot", "json", "csv"):
        raise ConfigError(f"output.format: expected dot, json or csv, got {fmt!r}")
    return RunConfig(
        source=source or {},
        cpt=doc.get("cpt"),
        output=output,
        thresholds=_check_thresholds(doc.get("thresholds")),
        generator=doc.get("generator", {}) or {},
        base_dir=path.parent,
    )
