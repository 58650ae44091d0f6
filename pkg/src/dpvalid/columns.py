"""Bounded column ingestion.

Numeric columns carry declared public bounds; values are clamped on the way
in and the clamp count is kept so analysts can see how aggressive their
bounds were. Categorical columns carry a declared level set. A CSV file plus
a sidecar JSON schema is the on-disk interchange format.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, MalformedRequestError


@dataclass(frozen=True)
class BoundedColumn:
    """Clamped numeric values with their public bounds."""

    values: np.ndarray
    lower: float
    upper: float
    clamped_count: int = 0
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise InvalidParameterError("bounds must be finite")
        if not self.lower < self.upper:
            raise InvalidParameterError(
                f"lower bound must be strictly below upper bound, got [{self.lower}, {self.upper}]"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @staticmethod
    def ingest(
        values, lower: float, upper: float, name: str = ""
    ) -> "BoundedColumn":
        """Clamp raw values into [lower, upper], recording how many moved."""
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1:
            raise InvalidParameterError("a column must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise MalformedRequestError(f"column {name!r} contains non-finite values")
        clamped = np.clip(arr, lower, upper)
        moved = int(np.count_nonzero(clamped != arr))
        return BoundedColumn(values=clamped, lower=float(lower), upper=float(upper),
                             clamped_count=moved, name=name)

    def subset(self, mask: np.ndarray) -> "BoundedColumn":
        return BoundedColumn(self.values[mask], self.lower, self.upper,
                             clamped_count=self.clamped_count, name=self.name)


@dataclass(frozen=True)
class CategoricalColumn:
    """String-coded values restricted to a declared level set."""

    values: np.ndarray  # dtype object/str
    levels: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.levels) < 2:
            raise InvalidParameterError(f"categorical {self.name!r} needs at least two levels")
        if len(set(self.levels)) != len(self.levels):
            raise InvalidParameterError(f"categorical {self.name!r} has duplicate levels")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @staticmethod
    def ingest(values, levels, name: str = "") -> "CategoricalColumn":
        arr = np.asarray([str(v) for v in values], dtype=object)
        levels = tuple(str(l) for l in levels)
        bad = set(arr) - set(levels)
        if bad:
            raise MalformedRequestError(
                f"column {name!r} contains undeclared levels: {sorted(bad)[:5]}"
            )
        return CategoricalColumn(values=arr, levels=levels, name=name)

    def subset(self, mask: np.ndarray) -> "CategoricalColumn":
        return CategoricalColumn(self.values[mask], self.levels, name=self.name)


@dataclass
class Table:
    """A loaded dataset: named bounded/categorical columns of equal length."""

    numeric: dict[str, BoundedColumn] = field(default_factory=dict)
    categorical: dict[str, CategoricalColumn] = field(default_factory=dict)

    @property
    def n(self) -> int:
        for col in self.numeric.values():
            return col.n
        for col in self.categorical.values():
            return col.n
        return 0

    def column_names(self) -> list[str]:
        return list(self.numeric) + list(self.categorical)

    def mask_for(self, predicates: dict[str, str]) -> np.ndarray:
        """Conjunctive equality filter over categorical columns."""
        mask = np.ones(self.n, dtype=bool)
        for name, value in predicates.items():
            if name not in self.categorical:
                raise MalformedRequestError(
                    f"filter column {name!r} is not a declared categorical"
                )
            col = self.categorical[name]
            if str(value) not in col.levels:
                raise MalformedRequestError(
                    f"filter value {value!r} is not a level of {name!r}"
                )
            mask &= col.values == str(value)
        return mask

    def subset(self, mask: np.ndarray) -> "Table":
        return Table(
            numeric={k: v.subset(mask) for k, v in self.numeric.items()},
            categorical={k: v.subset(mask) for k, v in self.categorical.items()},
        )


def load_schema(schema_path: str | Path) -> dict:
    with open(schema_path, encoding="utf-8") as fh:
        schema = json.load(fh)
    if "columns" not in schema or not isinstance(schema["columns"], dict):
        raise MalformedRequestError("schema must contain a 'columns' mapping")
    return schema


def load_table(csv_path: str | Path, schema: dict | str | Path) -> Table:
    """Load a CSV against its sidecar JSON schema.

    Schema shape::

        {"columns": {"income": {"kind": "numeric", "lower": 0, "upper": 30000},
                     "filing":  {"kind": "categorical", "levels": ["single", "joint"]}}}
    """
    if not isinstance(schema, dict):
        schema = load_schema(schema)
    cols = schema["columns"]
    raw: dict[str, list[str]] = {name: [] for name in cols}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(cols) - set(reader.fieldnames or [])
        if missing:
            raise MalformedRequestError(f"CSV is missing declared columns: {sorted(missing)}")
        for row in reader:
            for name in cols:
                raw[name].append(row[name])
    table = Table()
    for name, decl in cols.items():
        kind = decl.get("kind")
        if kind == "numeric":
            try:
                vals = [float(v) for v in raw[name]]
            except ValueError as exc:
                raise MalformedRequestError(f"column {name!r} has a non-numeric cell") from exc
            table.numeric[name] = BoundedColumn.ingest(vals, decl["lower"], decl["upper"], name)
        elif kind == "categorical":
            table.categorical[name] = CategoricalColumn.ingest(raw[name], decl["levels"], name)
        else:
            raise MalformedRequestError(f"column {name!r} has unknown kind {kind!r}")
    return table


def write_table_csv(path: str | Path, columns: dict[str, np.ndarray]) -> None:
    """Write named columns to CSV with a stable header order."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(n):
            writer.writerow([_fmt_cell(columns[name][i]) for name in names])


def _fmt_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
