import json
from pathlib import Path

import numpy as np
import pytest

from dpvalid.columns import write_table_csv
from dpvalid.synth import synth_taxlike_data, taxlike_schema


@pytest.fixture(scope="session")
def tax_table_small():
    """4000 synthetic rows, shared read-only across tests."""
    return synth_taxlike_data(4000, seed=17)


@pytest.fixture()
def tax_csv(tmp_path):
    """Writes a small synthetic dataset to disk; returns (csv_path, schema)."""
    table = synth_taxlike_data(800, seed=23)
    columns = {name: col.values for name, col in table.numeric.items()}
    columns.update({name: col.values for name, col in table.categorical.items()})
    csv_path = tmp_path / "tax.csv"
    write_table_csv(csv_path, columns)
    return csv_path, taxlike_schema()


def write_experiment_config(path: Path, **overrides) -> Path:
    doc = {
        "kind": "means",
        "epsilons": [1.0],
        "deltas": [0.001],
        "replications": 2,
        "seed": 5,
        "out_dir": str(path / "out"),
        "n": 300,
        "workers": 2,
    }
    doc.update(overrides)
    cfg = path / "experiment.json"
    cfg.write_text(json.dumps(doc), encoding="utf-8")
    return cfg
