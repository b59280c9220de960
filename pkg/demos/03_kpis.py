"""
Cycle times, batching and back-dated events
===========================================
"""
import tempfile
from pathlib import Path

from causalpm import (
    aggregate_level3,
    batching_type_distribution,
    case_projection,
    ceg_cycle_stats,
    end_event_distribution,
    event_type_cycle_stats,
    temporal_violations,
)
from causalpm.cli import build_database
from causalpm.config import load_run_config
from causalpm.generate import GeneratorConfig, generate, write_dataset

out = Path(tempfile.mkdtemp())
write_dataset(generate(GeneratorConfig(orders=300, batching_probability=0.3, anomaly_count=5), seed=1), out)
db, _, _ = build_database(load_run_config(out / "config.json"))
views = case_projection(db)

MIN = 60e6  # timestamps are microseconds
for label in db.types:
    s = event_type_cycle_stats(views, label, include_start=False)
    if s.count:
        print(f"{label:32s} min {s.min / MIN:7.1f}  avg {s.avg / MIN:7.1f}  max {s.max / MIN:7.1f} min")

s = ceg_cycle_stats(views)
print(f"\norder lead time: avg {s.avg / MIN / 60:.1f} h over {s.count} orders")

# shared delivery notes tie several orders together
for label, (n, rel) in batching_type_distribution(db).items():
    print(f"batching {label}: {n} events ({rel:.1%})")

for label, (n, rel) in end_event_distribution(aggregate_level3(views), views).items():
    print(f"ends in {label}: {n} ({rel:.1%})")

# each back-dated preparation breaks exactly one causal edge
found = temporal_violations(db)
print(f"\n{len(found)} temporal violations")
for v in found:
    gap = (v.cause_timestamp - v.effect_timestamp) / 1e6
    print(f"  {v.cause} is {gap:.0f}s after {v.effect}")
