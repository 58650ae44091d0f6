"""Dataset registry and query execution, independent of the HTTP layer.

The service owns everything stateful: registered tables, their budget
ledgers, and the per-query randomness streams. Queries are charged to the
ledger *before* any computation touches the data (fail-closed), with one
deliberate exception: a subset whose size falls below the dataset's minimum
is rejected free of charge. That rejection leaks the subset's existence;
see the API notes in the README.

Persistence layout under the storage directory, per dataset id::

    {id}.registration.json   public metadata (schema, budget, minimum size)
    {id}.data.csv            private copy of the ingested CSV
    {id}.ledger.ndjson       append-only charge ledger

Restarting a service over the same directory reloads every dataset and
replays its ledger, so accepted charges survive crashes.
"""

from __future__ import annotations

import itertools
import json
import re
import secrets
import shutil
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from ..accountant import BudgetLedger, ChargeRecord, LedgerStore, Spent
from ..columns import Table, load_schema, load_table
from ..errors import (
    CalibrationError,
    InsufficientDataError,
    InvalidParameterError,
    MalformedRequestError,
    NotFoundError,
)
from ..histograms import HistogramSpec, dp_histogram
from ..means import dp_mean_bhm, dp_mean_noisymad, dp_mean_noisyvar
from ..params import PrivacyParams
from ..quantiles import QuantileRequest, dp_quantile_smooth, dp_quantiles
from ..regression import (
    MECHANISMS,
    DesignSpec,
    RegressionOptions,
    bhm_regression,
    dp_regression,
)
from ..rng import RandomSource
from .config import ServerConfig

_ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")
_QUERY_ID_RE = re.compile(r"q-(\d+)(?::.*)?")

# regression mechanisms whose calibration consumes delta; checked before
# charging so an impossible request does not burn budget
_DELTA_MECHANISMS = frozenset({"analytic-gaussian", "wishart", "reg-normal"})


def _spent_json(s: Spent) -> dict:
    return {"epsilon": s.epsilon, "delta": s.delta}


@dataclass(frozen=True)
class DatasetRegistration:
    """Everything needed to stand up one queryable dataset."""

    dataset_id: str
    csv_path: str
    schema: dict
    budget: PrivacyParams
    min_subset_size: int

    def __post_init__(self):
        if not _ID_RE.fullmatch(self.dataset_id):
            raise MalformedRequestError(
                f"dataset id {self.dataset_id!r} must match {_ID_RE.pattern}"
            )
        if self.min_subset_size < 1:
            raise InvalidParameterError(
                f"minimum subset size must be a positive integer, got {self.min_subset_size}"
            )
        _check_schema(self.schema)

    @staticmethod
    def from_json(obj: dict, default_min_subset_size: int = 1) -> "DatasetRegistration":
        if not isinstance(obj, dict):
            raise MalformedRequestError("registration body must be a JSON object")
        known = {"dataset_id", "csv_path", "schema", "schema_path", "budget", "min_subset_size"}
        unknown = set(obj) - known
        if unknown:
            raise MalformedRequestError(f"unknown registration fields: {sorted(unknown)}")
        try:
            dataset_id = obj["dataset_id"]
            csv_path = obj["csv_path"]
            budget = obj["budget"]
        except KeyError as exc:
            raise MalformedRequestError(f"registration is missing field {exc.args[0]!r}") from None
        if "schema" in obj and "schema_path" in obj:
            raise MalformedRequestError("give either schema or schema_path, not both")
        if "schema" in obj:
            schema = obj["schema"]
        elif "schema_path" in obj:
            schema = load_schema(obj["schema_path"])
        else:
            raise MalformedRequestError("registration is missing field 'schema'")
        if not isinstance(budget, dict) or "epsilon" not in budget:
            raise MalformedRequestError("budget must be an object with epsilon (and optional delta)")
        params = PrivacyParams(float(budget["epsilon"]), float(budget.get("delta", 0.0)))
        return DatasetRegistration(
            dataset_id=str(dataset_id),
            csv_path=str(csv_path),
            schema=schema,
            budget=params,
            min_subset_size=int(obj.get("min_subset_size", default_min_subset_size)),
        )

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "csv_path": self.csv_path,
            "schema": self.schema,
            "budget": {"epsilon": self.budget.epsilon, "delta": self.budget.delta},
            "min_subset_size": self.min_subset_size,
        }


def _check_schema(schema: dict) -> None:
    """Reject schemas with unqueryable columns (missing bounds or levels)."""
    if not isinstance(schema, dict) or not isinstance(schema.get("columns"), dict):
        raise MalformedRequestError("schema must be an object with a 'columns' mapping")
    if not schema["columns"]:
        raise MalformedRequestError("schema declares no columns")
    for name, decl in schema["columns"].items():
        if not isinstance(decl, dict):
            raise MalformedRequestError(f"schema entry for column {name!r} must be an object")
        kind = decl.get("kind")
        if kind == "numeric":
            if "lower" not in decl or "upper" not in decl:
                raise MalformedRequestError(
                    f"numeric column {name!r} must declare lower and upper bounds"
                )
        elif kind == "categorical":
            if not decl.get("levels"):
                raise MalformedRequestError(f"categorical column {name!r} must declare its levels")
        else:
            raise MalformedRequestError(f"column {name!r} has unknown kind {kind!r}")


@dataclass
class _Dataset:
    registration: DatasetRegistration
    table: Table
    ledger: BudgetLedger
    seq: "itertools.count[int]"


class ValidationService:
    """Registered datasets plus the budget-enforcing query path.

    Thread-safe: the registry map is guarded by a lock, each ledger
    serializes its own charge path, and tables are immutable once
    registered.
    """

    def __init__(self, config: ServerConfig):
        self.config = config
        self.storage = Path(config.storage_dir)
        self.storage.mkdir(parents=True, exist_ok=True)
        self.store = LedgerStore(self.storage)
        self._datasets: dict[str, _Dataset] = {}
        self._registry_lock = threading.Lock()
        seed = config.seed if config.seed is not None else secrets.randbits(63)
        self._rng_root = RandomSource(seed).child("server")
        self._load_existing()

    # -- registry --------------------------------------------------------

    def _registration_path(self, dataset_id: str) -> Path:
        return self.storage / f"{dataset_id}.registration.json"

    def _data_path(self, dataset_id: str) -> Path:
        return self.storage / f"{dataset_id}.data.csv"

    def _load_existing(self) -> None:
        for path in sorted(self.storage.glob("*.registration.json")):
            with open(path, encoding="utf-8") as fh:
                reg = DatasetRegistration.from_json(json.load(fh))
            table = load_table(self._data_path(reg.dataset_id), reg.schema)
            ledger = self.store.load(reg.dataset_id)
            self._install(reg, table, ledger)

    def _install(self, reg: DatasetRegistration, table: Table, ledger: BudgetLedger) -> _Dataset:
        seq = itertools.count(_next_query_seq(ledger.charges))
        ds = _Dataset(registration=reg, table=table, ledger=ledger, seq=seq)
        self._datasets[reg.dataset_id] = ds
        return ds

    def _get(self, dataset_id: str) -> _Dataset:
        try:
            return self._datasets[dataset_id]
        except KeyError:
            raise NotFoundError(f"no dataset registered under id {dataset_id!r}") from None

    def register_dataset(self, reg: DatasetRegistration) -> dict:
        """Ingest the CSV, persist the registration, and open a fresh ledger.

        The commit point is the registration file write: a crash before it
        leaves only orphaned data/ledger files, which a later registration
        of the same id simply overwrites.
        """
        table = load_table(reg.csv_path, reg.schema)
        with self._registry_lock:
            if reg.dataset_id in self._datasets or self._registration_path(reg.dataset_id).exists():
                raise InvalidParameterError(
                    f"dataset id {reg.dataset_id!r} is already registered; ids are immutable"
                )
            shutil.copyfile(reg.csv_path, self._data_path(reg.dataset_id))
            ledger_path = self.store.path_for(reg.dataset_id)
            if ledger_path.exists():  # orphan from an interrupted registration
                ledger_path.unlink()
            ledger = self.store.create(reg.dataset_id, reg.budget)
            stored = DatasetRegistration(
                dataset_id=reg.dataset_id,
                csv_path=self._data_path(reg.dataset_id).name,
                schema=reg.schema,
                budget=reg.budget,
                min_subset_size=reg.min_subset_size,
            )
            tmp = self._registration_path(reg.dataset_id).with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(stored.to_json(), fh, indent=1, sort_keys=True)
            tmp.replace(self._registration_path(reg.dataset_id))
            ds = self._install(stored, table, ledger)
        return self._describe(ds)

    def _describe(self, ds: _Dataset) -> dict:
        # sample size is deliberately public, see the README
        return {
            "dataset_id": ds.registration.dataset_id,
            "n": ds.table.n,
            "schema": ds.registration.schema,
            "budget": {
                "epsilon": ds.registration.budget.epsilon,
                "delta": ds.registration.budget.delta,
            },
            "min_subset_size": ds.registration.min_subset_size,
        }

    def dataset_ids(self) -> list[str]:
        return sorted(self._datasets)

    # -- budget ------------------------------------------------------------

    def get_budget(self, dataset_id: str) -> dict:
        ds = self._get(dataset_id)
        spent = ds.ledger.spent()
        return {
            "dataset_id": dataset_id,
            "total": {
                "epsilon": ds.registration.budget.epsilon,
                "delta": ds.registration.budget.delta,
            },
            "spent": _spent_json(spent),
            "remaining": _spent_json(ds.ledger.remaining()),
            "n_charges": len(ds.ledger.charges),
        }

    def preview(self, dataset_id: str, body: dict) -> dict:
        """What-if feasibility of a charge; touches nothing."""
        ds = self._get(dataset_id)
        params = _parse_params(body)
        record = ChargeRecord(query_id="preview", params=params)
        res = ds.ledger.preview_charge(record)
        return {
            "accepted": res.accepted,
            "spent_after": _spent_json(res.spent_after),
            "remaining_after": _spent_json(res.remaining_after),
        }

    # -- queries -----------------------------------------------------------

    def handle_query(self, dataset_id: str, body: dict) -> dict:
        """Validate, size-check, charge, then execute. In that order.

        All request validation works off public metadata (schema, budget),
        so a malformed query is free. The subset-size check touches the
        data but is deliberately uncharged. After ``try_charge`` succeeds
        the charge is durable, so an execution failure (say a degenerate
        fit) still consumes budget; the error response reports it.
        """
        ds = self._get(dataset_id)
        if not isinstance(body, dict):
            raise MalformedRequestError("query body must be a JSON object")
        kind = body.get("kind")
        if kind not in _PARSERS:
            raise MalformedRequestError(
                f"unknown query kind {kind!r}; choose one of {sorted(_PARSERS)}"
            )
        params = _parse_params(body)
        predicates = _parse_filter(body, ds.table)
        run = _PARSERS[kind](body, ds.table, params)

        subset = ds.table
        if predicates:
            subset = ds.table.subset(ds.table.mask_for(predicates))
        if subset.n < ds.registration.min_subset_size:
            raise InsufficientDataError(
                f"the requested subset falls below the dataset's minimum size "
                f"({ds.registration.min_subset_size}); nothing was charged"
            )

        seq = next(ds.seq)
        query_id = f"q-{seq:06d}:{kind}"
        record = ChargeRecord(query_id=query_id, params=params)
        remaining = ds.ledger.try_charge(record)
        rng = self._rng_root.child("query", dataset_id, seq)
        result = run(subset, rng, query_id)
        return {
            "dataset_id": dataset_id,
            "query_id": query_id,
            "kind": kind,
            "result": result,
            "charge": {"epsilon": params.epsilon, "delta": params.delta},
            "remaining": _spent_json(remaining),
        }


def _next_query_seq(charges) -> int:
    """First unused sequence number, scanning past ids in the ledger."""
    best = 0
    for c in charges:
        m = _QUERY_ID_RE.fullmatch(c.query_id)
        if m:
            best = max(best, int(m.group(1)))
    return best + 1


# ---------------------------------------------------------------------------
# request parsing: one parser per query kind, each returning a runner closure
# over everything already validated. Runners are the only code that touches
# row-level data, and every value they return has passed through a mechanism.


_Runner = Callable[[Table, RandomSource, str], dict]


def _parse_params(body: dict) -> PrivacyParams:
    if "epsilon" not in body:
        raise MalformedRequestError("query is missing field 'epsilon'")
    try:
        return PrivacyParams(float(body["epsilon"]), float(body.get("delta", 0.0)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise MalformedRequestError(f"epsilon/delta must be numbers: {exc}") from None


def _parse_filter(body: dict, table: Table) -> dict[str, str]:
    predicates = body.get("filter", {})
    if not isinstance(predicates, dict):
        raise MalformedRequestError("filter must be an object of column: level pairs")
    for name, level in predicates.items():
        if name not in table.categorical:
            raise MalformedRequestError(f"filter column {name!r} is not categorical")
        if level not in table.categorical[name].levels:
            raise MalformedRequestError(
                f"filter level {level!r} is not a declared level of column {name!r}"
            )
    return {str(k): str(v) for k, v in predicates.items()}


def _numeric_column(body: dict, table: Table, field: str = "column") -> str:
    name = body.get(field)
    if not isinstance(name, str):
        raise MalformedRequestError(f"query is missing field {field!r}")
    if name not in table.numeric:
        raise MalformedRequestError(f"{name!r} is not a numeric column of this dataset")
    return name


def _confidence(body: dict) -> float:
    conf = float(body.get("confidence", 0.95))
    if not (0.0 < conf < 1.0):
        raise InvalidParameterError(f"confidence must lie in (0, 1), got {conf}")
    return conf


def _require_delta(params: PrivacyParams, what: str) -> None:
    if not (0.0 < params.delta < 1.0):
        raise CalibrationError(f"{what} needs delta in (0, 1), got {params.delta}")


def _parse_histogram(body: dict, table: Table, params: PrivacyParams) -> _Runner:
    name = _numeric_column(body, table)
    mechanism = body.get("mechanism", "laplace")
    if mechanism not in ("laplace", "gaussian"):
        raise MalformedRequestError(f"unknown histogram mechanism {mechanism!r}")
    if mechanism == "gaussian":
        _require_delta(params, "the gaussian histogram mechanism")
    column = table.numeric[name]
    if "edges" in body:
        spec = HistogramSpec(body["edges"])
        if not spec.covers(column):
            raise InvalidParameterError("bin edges must cover the column's declared bounds")
    else:
        n_bins = int(body.get("n_bins", 10))
        if n_bins < 1:
            raise InvalidParameterError(f"n_bins must be a positive integer, got {n_bins}")
        spec = HistogramSpec.regular(column.lower, column.upper, n_bins)

    def run(subset: Table, rng: RandomSource, query_id: str) -> dict:
        res = dp_histogram(subset.numeric[name], spec, params, mechanism, rng, query_id)
        return {
            "column": name,
            "edges": [float(e) for e in spec.edges],
            "counts": [float(c) for c in res.postprocessed],
            "raw_counts": [float(c) for c in res.raw],
            "mechanism": res.mechanism,
            "noise_scale": res.noise_scale,
            "renyi_alpha": res.renyi_alpha,
        }

    return run


def _parse_mean(body: dict, table: Table, params: PrivacyParams) -> _Runner:
    name = _numeric_column(body, table)
    method = body.get("method", "noisyvar")
    if method not in ("noisyvar", "noisymad", "bhm"):
        raise MalformedRequestError(f"unknown mean method {method!r}")
    conf = _confidence(body)
    k = int(body.get("k", 10))
    if method == "bhm":
        if k < 1:
            raise InvalidParameterError(f"k must be a positive integer, got {k}")
        if k > 1:
            _require_delta(params, "replicate composition with k > 1")

    def run(subset: Table, rng: RandomSource, query_id: str) -> dict:
        column = subset.numeric[name]
        if method == "noisyvar":
            res = dp_mean_noisyvar(column, params.epsilon, conf, rng, query_id)
        elif method == "noisymad":
            res = dp_mean_noisymad(column, params.epsilon, conf, rng, query_id)
        else:
            res = dp_mean_bhm(column, params, k, conf, rng, query_id)
        return {
            "column": name,
            "method": res.method,
            "point": res.point,
            "ci_lower": res.ci_lower,
            "ci_upper": res.ci_upper,
            "confidence": res.confidence,
            "sigma_tilde": res.sigma_tilde,
        }

    return run


def _parse_quantile(body: dict, table: Table, params: PrivacyParams) -> _Runner:
    name = _numeric_column(body, table)
    mode = body.get("mode", "pure-split")
    if mode not in ("pure-split", "zcdp-compose", "smooth"):
        raise MalformedRequestError(f"unknown quantile mode {mode!r}")
    probs = body.get("probabilities")
    if not isinstance(probs, list) or not probs:
        raise MalformedRequestError("quantile queries need a nonempty probabilities list")
    probs = [float(q) for q in probs]
    if any(b <= a for a, b in zip(probs, probs[1:])):
        raise MalformedRequestError("probabilities must be strictly increasing")
    if mode == "zcdp-compose" and len(probs) > 1:
        _require_delta(params, "zcdp-compose budget splitting")
    if mode == "smooth":
        _require_delta(params, "smooth-sensitivity noise")

    def run(subset: Table, rng: RandomSource, query_id: str) -> dict:
        column = subset.numeric[name]
        if mode == "smooth":
            m = len(probs)
            share = PrivacyParams(params.epsilon / m, params.delta / m)
            values = [
                dp_quantile_smooth(column, q, share, rng.child("q", i), query_id)[0]
                for i, q in enumerate(probs)
            ]
            eps0 = share.epsilon
        else:
            res = dp_quantiles(column, QuantileRequest(tuple(probs), mode), params, rng, query_id)
            values = list(res.values)
            eps0 = res.per_quantile_epsilon
        return {
            "column": name,
            "mode": mode,
            "probabilities": probs,
            "values": [float(v) for v in values],
            "per_quantile_epsilon": eps0,
        }

    return run


def _parse_regression(body: dict, table: Table, params: PrivacyParams) -> _Runner:
    response = _numeric_column(body, table, field="response")
    numeric = body.get("numeric", [])
    categorical = body.get("categorical", [])
    if not isinstance(numeric, list) or not isinstance(categorical, list):
        raise MalformedRequestError("numeric and categorical must be lists of column names")
    for n in numeric:
        if n not in table.numeric:
            raise MalformedRequestError(f"{n!r} is not a numeric column of this dataset")
    for c in categorical:
        if c not in table.categorical:
            raise MalformedRequestError(f"{c!r} is not a categorical column of this dataset")
    mechanism = body.get("mechanism", "analytic-gaussian")
    if mechanism not in MECHANISMS:
        raise MalformedRequestError(
            f"unknown regression mechanism {mechanism!r}; choose one of {MECHANISMS}"
        )
    if mechanism in _DELTA_MECHANISMS:
        _require_delta(params, f"the {mechanism} mechanism")
    if mechanism == "wishart" and params.epsilon >= 1.0:
        raise CalibrationError(
            f"the Wishart mechanism is only calibrated for epsilon < 1 (got {params.epsilon})"
        )
    method = body.get("method", "plugin")
    if method not in ("plugin", "bhm"):
        raise MalformedRequestError(f"unknown regression method {method!r}")
    k_draws = int(body.get("k_draws", 5))
    if method == "bhm" and k_draws < 2:
        raise InvalidParameterError(f"bhm regression needs k_draws >= 2, got {k_draws}")
    b_replicates = int(body.get("b_replicates", 400))
    if b_replicates < 100:
        raise InvalidParameterError(f"b_replicates must be at least 100, got {b_replicates}")
    score_scale = str(body.get("score_scale", "nhat"))
    if score_scale not in ("nhat", "classical"):
        raise MalformedRequestError(f"unknown score_scale {score_scale!r}")
    options = RegressionOptions(
        confidence=_confidence(body),
        b_replicates=b_replicates,
        score_scale=score_scale,
    )
    intercept = bool(body.get("intercept", True))

    def run(subset: Table, rng: RandomSource, query_id: str) -> dict:
        spec = DesignSpec(
            response=subset.numeric[response],
            numeric=tuple(subset.numeric[n] for n in numeric),
            categorical=tuple(subset.categorical[c] for c in categorical),
            intercept=intercept,
        )
        if method == "bhm":
            est = bhm_regression(spec, mechanism, params, k_draws, rng, options, query_id)
        else:
            est = dp_regression(spec, mechanism, params, rng, options, query_id)
        return est.to_json()

    return run


_PARSERS: dict[str, Callable[[dict, Table, PrivacyParams], _Runner]] = {
    "histogram": _parse_histogram,
    "mean": _parse_mean,
    "quantile": _parse_quantile,
    "regression": _parse_regression,
}
