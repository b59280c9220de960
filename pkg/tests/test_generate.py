import math

import pytest

from causalpm.analysis import batching_type_distribution, temporal_violations
from causalpm.cli import build_database
from causalpm.config import load_run_config
from causalpm.errors import ConfigError
from causalpm.generate import GeneratorConfig, generate, write_dataset


def build(tmp_path, **kw):
    seed = kw.pop("seed", 0)
    data = generate(GeneratorConfig(**kw), seed=seed)
    write_dataset(data, tmp_path)
    db, cpt, report = build_database(load_run_config(tmp_path / "config.json"))
    return data, db, cpt, report


def test_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_dataset(generate(GeneratorConfig(orders=50), seed=3), a)
    write_dataset(generate(GeneratorConfig(orders=50), seed=3), b)
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()
    c = tmp_path / "c"
    write_dataset(generate(GeneratorConfig(orders=50), seed=4), c)
    assert (a / "orders.csv").read_bytes() != (c / "orders.csv").read_bytes()


def test_generated_data_builds_cleanly(tmp_path):
    data, db, cpt, report = build(tmp_path, orders=40)
    assert report.ok and not report.warnings
    assert len(db) == sum(data.manifest["rows"].values())
    assert temporal_violations(db) == []


def test_no_batching_without_probability(tmp_path):
    _, db, _, _ = build(tmp_path, orders=60, batching_probability=0.0)
    assert batching_type_distribution(db) == {}


def test_batching_marks_shared_delivery_notes(tmp_path):
    _, db, _, _ = build(tmp_path, orders=60, batching_probability=0.5)
    dist = batching_type_distribution(db)
    assert "Create Delivery Note" in dist and "Deliver Order" in dist


def test_exact_anomaly_count(tmp_path):
    data, db, _, _ = build(tmp_path, orders=30, anomaly_count=4)
    assert data.manifest["anomalies_injected"] == 4
    found = temporal_violations(db)
    assert len(found) == 4
    assert {v.cause.split(":", 1)[1] for v in found} == set(data.manifest["anomalous_preparations"])


def test_anomaly_rate_within_three_sigma(tmp_path):
    data, db, _, _ = build(tmp_path, orders=1000, anomaly_rate=0.05, seed=11)
    n = data.manifest["anomaly_eligible"]
    mean, sd = n * 0.05, math.sqrt(n * 0.05 * 0.95)
    assert abs(len(temporal_violations(db)) - mean) <= 3 * sd
    assert len(temporal_violations(db)) == data.manifest["anomalies_injected"]


def test_config_validation():
    with pytest.raises(ConfigError, match="items_per_order"):
        GeneratorConfig.from_dict({"items_per_order": [3, 1]})
    with pytest.raises(ConfigError, match="outside"):
        GeneratorConfig.from_dict({"batching_probability": 1.5})
    with pytest.raises(ConfigError, match="unknown"):
        GeneratorConfig.from_dict({"colour": "red"})
    with pytest.raises(ConfigError, match="exceeds"):
        generate(GeneratorConfig(orders=1, items_per_order=(1, 1), anomaly_count=5))
