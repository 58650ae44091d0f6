"""Evaluation harness: grids of (epsilon, delta), replicated releases,
utility metrics, and byte-stable result tables.

A run is fully determined by its config: the dataset is either loaded from
CSV or generated from the config seed, every task (method x grid point x
replication) derives its own RNG stream by hashing its coordinates, tasks
execute on a thread pool, and all outputs are sorted before writing so a
re-run produces byte-identical files. Raw release values are persisted next
to the metric records, and metrics can be recomputed offline from them.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import __version__
from .columns import Table, load_table
from .errors import DpvalidError, InvalidParameterError, UndefinedMetricError
from .histograms import HistogramSpec, cumulative_error_metrics, dp_histogram
from .means import dp_mean_bhm, dp_mean_noisymad, dp_mean_noisyvar
from .metrics import ci_overlap, ci_ratio, sign_significance_match
from .params import PrivacyParams
from .quantiles import QuantileRequest, dp_quantile_smooth, dp_quantiles
from .regression import DesignSpec, RegressionOptions, bhm_regression, dp_regression
from .rng import RandomSource
from .synth import synth_taxlike_data

EXPERIMENT_KINDS = ("histogram", "means", "quantiles", "regression")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a query suite evaluated over an (epsilon, delta) grid."""

    kind: str
    epsilons: tuple[float, ...]
    deltas: tuple[float, ...]
    replications: int
    seed: int
    out_dir: str
    n: int = 100_000
    csv_path: str | None = None
    schema_path: str | None = None
    workers: int = 8
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise InvalidParameterError(
                f"unknown experiment kind {self.kind!r}; choose one of {EXPERIMENT_KINDS}"
            )
        if self.replications < 1:
            raise InvalidParameterError("replications must be at least 1")
        if not self.epsilons or not self.deltas:
            raise InvalidParameterError("epsilon and delta grids must be nonempty")
        if (self.csv_path is None) != (self.schema_path is None):
            raise InvalidParameterError("csv_path and schema_path must be given together")
        if self.workers < 1:
            raise InvalidParameterError("workers must be at least 1")

    @staticmethod
    def from_json(doc: dict) -> "ExperimentConfig":
        known = {
            "kind", "epsilons", "deltas", "replications", "seed", "out_dir",
            "n", "csv_path", "schema_path", "workers", "options",
        }
        unknown = set(doc) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        try:
            return ExperimentConfig(
                kind=doc["kind"],
                epsilons=tuple(float(e) for e in doc["epsilons"]),
                deltas=tuple(float(d) for d in doc["deltas"]),
                replications=int(doc["replications"]),
                seed=int(doc["seed"]),
                out_dir=str(doc["out_dir"]),
                n=int(doc.get("n", 100_000)),
                csv_path=doc.get("csv_path"),
                schema_path=doc.get("schema_path"),
                workers=int(doc.get("workers", 8)),
                options=dict(doc.get("options", {})),
            )
        except KeyError as exc:
            raise InvalidParameterError(f"config is missing required key {exc}") from exc

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "epsilons": list(self.epsilons),
            "deltas": list(self.deltas),
            "replications": self.replications,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "n": self.n,
            "csv_path": self.csv_path,
            "schema_path": self.schema_path,
            "workers": self.workers,
            "options": self.options,
        }


@dataclass(frozen=True)
class MetricsRecord:
    """One metric value for one (method, grid point, replication)."""

    method: str
    epsilon: float
    delta: float
    replication: int
    metric: str
    value: float
    note: str = ""  # reason when value is NaN

    def sort_key(self):
        return (self.method, self.epsilon, self.delta, self.replication, self.metric)


# ---------------------------------------------------------------------------
# confidential baselines


def _mean_baseline(column) -> dict:
    values = column.values
    n = column.n
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1))
    z = float(norm.ppf(0.975))
    half = z * sd / math.sqrt(n)
    return {"mean": mean, "sd": sd, "n": n, "ci": [mean - half, mean + half]}


def _regression_spec(table: Table, options: dict) -> DesignSpec:
    response = table.numeric[options.get("response", "capgains_ratio")]
    numeric_names = options.get(
        "numeric", ["marginal_rate", "log_dividends", "log_agi"]
    )
    categorical_names = options.get("categorical", ["age65"])
    return DesignSpec(
        response=response,
        numeric=tuple(table.numeric[name] for name in numeric_names),
        categorical=tuple(table.categorical[name] for name in categorical_names),
        intercept=bool(options.get("intercept", True)),
    )


def _regression_baseline(table: Table, options: dict, seed: int) -> dict:
    spec = _regression_spec(table, options)
    conf = dp_regression(
        spec,
        "laplace",
        PrivacyParams(1.0, 0.0),
        RandomSource(seed).child("baseline"),
        RegressionOptions(
            noise_off=True,
            score_scale="classical",
            b_replicates=max(100, int(options.get("b_replicates", 400))),
            confidence=float(options.get("confidence", 0.95)),
        ),
    )
    return {
        "names": list(conf.coef_names),
        "beta": [float(b) for b in conf.beta],
        "ci": [[float(v) for v in row] for row in conf.ci_asymptotic],
    }


# ---------------------------------------------------------------------------
# per-kind suites: methods, baseline, one release, metrics from raw


class _Suite:
    def __init__(self, config: ExperimentConfig, table: Table):
        self.config = config
        self.table = table
        self.options = config.options

    def methods(self) -> list[str]:
        raise NotImplementedError

    def baseline(self) -> dict:
        raise NotImplementedError

    def release(self, method: str, params: PrivacyParams, rng: RandomSource) -> dict:
        raise NotImplementedError

    def metrics(self, method: str, baseline: dict, raw: dict) -> dict[str, float | tuple]:
        """metric name -> value, or (nan, reason) for undefined entries."""
        raise NotImplementedError


class _HistogramSuite(_Suite):
    def __init__(self, config, table):
        super().__init__(config, table)
        self.column = table.numeric[self.options.get("column", "income")]
        self.spec = HistogramSpec.regular(
            self.column.lower, self.column.upper, int(self.options.get("bins", 150))
        )

    def methods(self):
        return list(self.options.get("mechanisms", ["laplace", "gaussian"]))

    def baseline(self):
        true, _ = np.histogram(self.column.values, bins=self.spec.edges)
        return {"true_counts": [int(c) for c in true]}

    def release(self, method, params, rng):
        res = dp_histogram(self.column, self.spec, params, method, rng)
        return {"counts": [float(c) for c in res.postprocessed]}

    def metrics(self, method, baseline, raw):
        true = np.asarray(baseline["true_counts"], dtype=float)
        noisy = np.asarray(raw["counts"], dtype=float)
        cum = cumulative_error_metrics(true, noisy)
        return {
            "cum_rel_err_max": cum.max_relative,
            "cum_rel_err_mean": cum.mean_relative,
        }


class _MeansSuite(_Suite):
    def __init__(self, config, table):
        super().__init__(config, table)
        self.column = table.numeric[self.options.get("column", "income")]
        self.confidence = float(self.options.get("confidence", 0.95))
        self.k = int(self.options.get("k", 10))

    def methods(self):
        return list(self.options.get("methods", ["noisyvar", "noisymad", "bhm"]))

    def baseline(self):
        return _mean_baseline(self.column)

    def release(self, method, params, rng):
        if method == "noisyvar":
            res = dp_mean_noisyvar(self.column, params.epsilon, self.confidence, rng)
        elif method == "noisymad":
            res = dp_mean_noisymad(self.column, params.epsilon, self.confidence, rng)
        elif method == "bhm":
            res = dp_mean_bhm(self.column, params, self.k, self.confidence, rng)
        else:
            raise InvalidParameterError(f"unknown mean method {method!r}")
        return {"point": res.point, "ci": [res.ci_lower, res.ci_upper]}

    def metrics(self, method, baseline, raw):
        true = baseline["mean"]
        point = raw["point"]
        out: dict[str, float | tuple] = {}
        if true == 0.0:
            out["abs_err"] = abs(point - true)
        else:
            out["rel_err"] = abs(point - true) / abs(true)
        for name, fn in (("cio", ci_overlap), ("cir", ci_ratio)):
            try:
                out[name] = fn(baseline["ci"], raw["ci"])
            except UndefinedMetricError as exc:
                out[name] = (math.nan, str(exc))
        return out


class _QuantilesSuite(_Suite):
    def __init__(self, config, table):
        super().__init__(config, table)
        self.column = table.numeric[self.options.get("column", "income")]
        self.probabilities = tuple(
            float(q) for q in self.options.get("probabilities", [0.1, 0.25, 0.5, 0.75, 0.9])
        )

    def methods(self):
        return list(
            self.options.get("methods", ["exp-pure-split", "exp-zcdp-compose", "smooth"])
        )

    def baseline(self):
        values = np.quantile(self.column.values, self.probabilities)
        return {"quantiles": [float(v) for v in values]}

    def release(self, method, params, rng):
        if method in ("exp-pure-split", "exp-zcdp-compose"):
            mode = "pure-split" if method == "exp-pure-split" else "zcdp-compose"
            res = dp_quantiles(
                self.column, QuantileRequest(self.probabilities, mode), params, rng
            )
            return {"values": [float(v) for v in res.values]}
        if method == "smooth":
            m = len(self.probabilities)
            share = PrivacyParams(params.epsilon / m, params.delta / m)
            values = []
            for i, q in enumerate(self.probabilities):
                value, _ = dp_quantile_smooth(self.column, q, share, rng.child("q", i))
                values.append(float(value))
            return {"values": values}
        raise InvalidParameterError(f"unknown quantile method {method!r}")

    def metrics(self, method, baseline, raw):
        out: dict[str, float | tuple] = {}
        for q, true, got in zip(self.probabilities, baseline["quantiles"], raw["values"]):
            if true == 0.0:
                out[f"abs_err_q{q:g}"] = abs(got - true)
            else:
                out[f"rel_err_q{q:g}"] = abs(got - true) / abs(true)
        return out


class _RegressionSuite(_Suite):
    def __init__(self, config, table):
        super().__init__(config, table)
        self.spec = _regression_spec(table, self.options)
        self.confidence = float(self.options.get("confidence", 0.95))
        self.b_replicates = int(self.options.get("b_replicates", 400))
        self.k = int(self.options.get("k", 10))

    def methods(self):
        return list(self.options.get("mechanisms", ["laplace", "analytic-gaussian"]))

    def baseline(self):
        return _regression_baseline(self.table, self.options, self.config.seed)

    def release(self, method, params, rng):
        opts = RegressionOptions(
            confidence=self.confidence, b_replicates=self.b_replicates
        )
        if method == "bhm":
            est = bhm_regression(self.spec, "laplace", params, self.k, rng, opts)
        else:
            est = dp_regression(self.spec, method, params, rng, opts)
        raw = {
            "names": list(est.coef_names),
            "beta": [float(b) for b in est.beta],
            "ci_asymptotic": [[float(v) for v in row] for row in est.ci_asymptotic],
        }
        if est.ci_bootstrap is not None:
            raw["ci_bootstrap"] = [[float(v) for v in row] for row in est.ci_bootstrap]
        return raw

    def metrics(self, method, baseline, raw):
        out: dict[str, float | tuple] = {}
        for j, name in enumerate(baseline["names"]):
            true = baseline["beta"][j]
            got = raw["beta"][j]
            ci_o = baseline["ci"][j]
            ci_a = raw["ci_asymptotic"][j]
            if true == 0.0:
                out[f"abs_err.{name}"] = abs(got - true)
            else:
                out[f"rel_err.{name}"] = abs(got - true) / abs(true)
            for label, ci_s in [("asym", ci_a)] + (
                [("boot", raw["ci_bootstrap"][j])] if "ci_bootstrap" in raw else []
            ):
                try:
                    out[f"cio_{label}.{name}"] = ci_overlap(ci_o, ci_s)
                    out[f"cir_{label}.{name}"] = ci_ratio(ci_o, ci_s)
                except UndefinedMetricError as exc:
                    out[f"cio_{label}.{name}"] = (math.nan, str(exc))
                    out[f"cir_{label}.{name}"] = (math.nan, str(exc))
            if "ci_bootstrap" in raw:
                lo, hi = raw["ci_bootstrap"][j]
                out[f"cover_boot.{name}"] = float(lo <= true <= hi)
            sign, signif = sign_significance_match(true, ci_o, got, ci_a)
            out[f"sign_match.{name}"] = float(sign)
            out[f"signif_match.{name}"] = float(signif)
        return out


_SUITES = {
    "histogram": _HistogramSuite,
    "means": _MeansSuite,
    "quantiles": _QuantilesSuite,
    "regression": _RegressionSuite,
}


# ---------------------------------------------------------------------------
# orchestration


def load_experiment_table(config: ExperimentConfig) -> Table:
    if config.csv_path is not None:
        return load_table(config.csv_path, config.schema_path)
    return synth_taxlike_data(config.n, config.seed)


def _task_rng(seed: int, method: str, eps: float, delta: float, rep: int) -> RandomSource:
    return RandomSource(seed).child("task", method, repr(eps), repr(delta), rep)


def _run_one(suite: _Suite, method: str, eps: float, delta: float, rep: int) -> dict:
    task = {"method": method, "epsilon": eps, "delta": delta, "replication": rep}
    try:
        params = PrivacyParams(eps, delta)
        rng = _task_rng(suite.config.seed, method, eps, delta, rep)
        task["raw"] = suite.release(method, params, rng)
    except DpvalidError as exc:
        task["error"] = f"{exc.code}: {exc}"
    return task


def _records_for_task(suite: _Suite, baseline: dict, task: dict) -> list[MetricsRecord]:
    head = (task["method"], task["epsilon"], task["delta"], task["replication"])
    if "error" in task:
        return [MetricsRecord(*head, "release_failed", math.nan, note=task["error"])]
    records = []
    computed = suite.metrics(task["method"], baseline, task["raw"])
    for metric in sorted(computed):
        value = computed[metric]
        if isinstance(value, tuple):
            records.append(MetricsRecord(*head, metric, math.nan, note=value[1]))
        else:
            records.append(MetricsRecord(*head, metric, float(value)))
    return records


def records_from_raw(doc: dict) -> list[MetricsRecord]:
    """Recompute metric records from a persisted raw-output document."""
    config = ExperimentConfig.from_json(doc["config"])
    table = load_experiment_table(config)
    suite = _SUITES[config.kind](config, table)
    records = []
    for task in doc["tasks"]:
        records.extend(_records_for_task(suite, doc["baseline"], task))
    return sorted(records, key=MetricsRecord.sort_key)


def run_experiment(config: ExperimentConfig) -> list[MetricsRecord]:
    """Execute the full grid and write records, raw outputs, and manifest.

    Returns the sorted metric records. Files written under config.out_dir:
    records.csv, records.json, summary.csv, raw.json, manifest.json. File
    contents depend only on the config (including its seed), never on
    scheduling order or wall-clock time.
    """
    table = load_experiment_table(config)
    suite = _SUITES[config.kind](config, table)
    baseline = suite.baseline()
    coords = [
        (method, eps, delta, rep)
        for method in suite.methods()
        for eps in config.epsilons
        for delta in config.deltas
        for rep in range(config.replications)
    ]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        tasks = list(pool.map(lambda c: _run_one(suite, *c), coords))
    tasks.sort(key=lambda t: (t["method"], t["epsilon"], t["delta"], t["replication"]))
    records = []
    for task in tasks:
        records.extend(_records_for_task(suite, baseline, task))
    records.sort(key=MetricsRecord.sort_key)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(out / "records.csv", records)
    (out / "records.json").write_text(_records_json(records), encoding="utf-8")
    write_summary_csv(out / "summary.csv", records)
    raw_doc = {"config": config.to_json(), "baseline": baseline, "tasks": tasks}
    (out / "raw.json").write_text(
        json.dumps(raw_doc, indent=1, sort_keys=True, allow_nan=False), encoding="utf-8"
    )
    manifest = {
        "version": __version__,
        "kind": config.kind,
        "seed": config.seed,
        "config": config.to_json(),
        "methods": suite.methods(),
        "grid_points": len(config.epsilons) * len(config.deltas),
        "replications": config.replications,
        "records": len(records),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8"
    )
    return records


def write_records_csv(path, records: list[MetricsRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "epsilon", "delta", "replication", "metric", "value", "note"])
        for r in records:
            writer.writerow(
                [r.method, repr(r.epsilon), repr(r.delta), r.replication, r.metric,
                 repr(r.value), r.note]
            )


def _records_json(records: list[MetricsRecord]) -> str:
    rows = []
    for r in records:
        rows.append(
            {
                "method": r.method,
                "epsilon": r.epsilon,
                "delta": r.delta,
                "replication": r.replication,
                "metric": r.metric,
                "value": None if math.isnan(r.value) else r.value,
                "note": r.note,
            }
        )
    return json.dumps(rows, indent=1, sort_keys=True, allow_nan=False)


def write_summary_csv(path, records: list[MetricsRecord]) -> None:
    """Mean and median per (method, epsilon, delta, metric), NaNs dropped."""
    groups: dict[tuple, list[float]] = {}
    for r in records:
        groups.setdefault((r.method, r.epsilon, r.delta, r.metric), []).append(r.value)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "epsilon", "delta", "metric", "count", "mean", "median"])
        for key in sorted(groups):
            values = np.asarray(groups[key], dtype=float)
            ok = values[~np.isnan(values)]
            mean = float(np.mean(ok)) if ok.size else math.nan
            median = float(np.median(ok)) if ok.size else math.nan
            writer.writerow(
                [key[0], repr(key[1]), repr(key[2]), key[3], int(ok.size),
                 repr(mean), repr(median)]
            )
