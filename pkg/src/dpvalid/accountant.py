"""Per-dataset privacy budget accounting with durable, append-only ledgers.

Charges compose sequentially (epsilons and deltas add) except within a named
parallel group, where charges cover disjoint slices of the data and only the
group maximum counts. A charge is accepted atomically: it is written to the
ledger file before the caller sees success, so a crash after the write can
only over-count, never under-count.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import BudgetExceededError, InvalidParameterError, MalformedRequestError
from .params import PrivacyParams

# absolute-plus-relative slack so sums of float charges (e.g. fifty 0.1s
# against a 5.0 total) compare the way the decimal arithmetic reads
_TOL = 1e-9


class Spent(NamedTuple):
    epsilon: float
    delta: float


@dataclass(frozen=True)
class ChargeRecord:
    """One accepted (or proposed) privacy charge."""

    query_id: str
    params: PrivacyParams
    composition: str = "sequential"  # "sequential" | "parallel"
    group: str | None = None
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.composition not in ("sequential", "parallel"):
            raise InvalidParameterError(f"unknown composition kind {self.composition!r}")
        if self.composition == "parallel" and not self.group:
            raise InvalidParameterError("parallel charges need a group id")

    def to_json(self) -> dict:
        return {
            "kind": "charge",
            "query_id": self.query_id,
            "epsilon": self.params.epsilon,
            "delta": self.params.delta,
            "composition": self.composition,
            "group": self.group,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_json(obj: dict) -> "ChargeRecord":
        return ChargeRecord(
            query_id=obj["query_id"],
            params=PrivacyParams(obj["epsilon"], obj["delta"]),
            composition=obj["composition"],
            group=obj.get("group"),
            timestamp=obj["timestamp"],
        )


class PreviewResult(NamedTuple):
    accepted: bool
    spent_after: Spent
    remaining_after: Spent


def _leq(a: float, b: float) -> bool:
    return a <= b + _TOL * max(1.0, abs(b)) + _TOL


def compose_spent(charges: Iterable[ChargeRecord]) -> Spent:
    """Total loss: sequential charges add; each parallel group adds its max."""
    eps = 0.0
    delta = 0.0
    group_eps: dict[str, float] = {}
    group_delta: dict[str, float] = {}
    for c in charges:
        if c.composition == "sequential":
            eps += c.params.epsilon
            delta += c.params.delta
        else:
            g = c.group or ""
            group_eps[g] = max(group_eps.get(g, 0.0), c.params.epsilon)
            group_delta[g] = max(group_delta.get(g, 0.0), c.params.delta)
    eps += sum(group_eps.values())
    delta += sum(group_delta.values())
    return Spent(eps, delta)


class BudgetLedger:
    """Budget state for one dataset, optionally backed by an NDJSON file."""

    def __init__(self, dataset_id: str, total: PrivacyParams, path: str | Path | None = None):
        self.dataset_id = dataset_id
        self.total = total
        self.charges: list[ChargeRecord] = []
        self._lock = threading.Lock()
        self._path = Path(path) if path is not None else None
        if self._path is not None and not self._path.exists():
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._append_line(
                {
                    "kind": "ledger",
                    "dataset_id": dataset_id,
                    "epsilon": total.epsilon,
                    "delta": total.delta,
                }
            )

    # -- persistence ---------------------------------------------------

    def _append_line(self, obj: dict) -> None:
        assert self._path is not None
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    @staticmethod
    def replay(path: str | Path) -> "BudgetLedger":
        """Reconstruct a ledger exactly from its NDJSON file."""
        path = Path(path)
        header = None
        charges: list[ChargeRecord] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if obj.get("kind") == "ledger":
                    header = obj
                elif obj.get("kind") == "charge":
                    charges.append(ChargeRecord.from_json(obj))
                else:
                    raise MalformedRequestError(f"unknown ledger line kind {obj.get('kind')!r}")
        if header is None:
            raise MalformedRequestError(f"ledger file {path} has no header line")
        ledger = BudgetLedger.__new__(BudgetLedger)
        ledger.dataset_id = header["dataset_id"]
        ledger.total = PrivacyParams(header["epsilon"], header["delta"])
        ledger.charges = charges
        ledger._lock = threading.Lock()
        ledger._path = path
        return ledger

    # -- accounting ----------------------------------------------------

    def spent(self) -> Spent:
        with self._lock:
            return compose_spent(self.charges)

    def remaining(self) -> Spent:
        s = self.spent()
        return Spent(max(0.0, self.total.epsilon - s.epsilon), max(0.0, self.total.delta - s.delta))

    def _would_spend(self, record: ChargeRecord) -> Spent:
        return compose_spent(self.charges + [record])

    def preview_charge(self, record: ChargeRecord) -> PreviewResult:
        """Feasibility check without mutating anything."""
        with self._lock:
            after = self._would_spend(record)
            ok = _leq(after.epsilon, self.total.epsilon) and _leq(after.delta, self.total.delta)
            rem = Spent(
                max(0.0, self.total.epsilon - after.epsilon),
                max(0.0, self.total.delta - after.delta),
            )
            return PreviewResult(ok, after, rem)

    def try_charge(self, record: ChargeRecord) -> Spent:
        """Atomically accept the charge or raise BudgetExceededError.

        On acceptance the record is durable in the ledger file before this
        method returns. Returns the remaining budget.
        """
        with self._lock:
            after = self._would_spend(record)
            if not (_leq(after.epsilon, self.total.epsilon) and _leq(after.delta, self.total.delta)):
                now = compose_spent(self.charges)
                raise BudgetExceededError(
                    f"charge ({record.params.epsilon}, {record.params.delta}) exceeds "
                    f"remaining budget of dataset {self.dataset_id!r}",
                    remaining_epsilon=max(0.0, self.total.epsilon - now.epsilon),
                    remaining_delta=max(0.0, self.total.delta - now.delta),
                )
            if self._path is not None:
                self._append_line(record.to_json())
            self.charges.append(record)
            return Spent(
                max(0.0, self.total.epsilon - after.epsilon),
                max(0.0, self.total.delta - after.delta),
            )


class LedgerStore:
    """Directory of per-dataset ledger files."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, dataset_id: str) -> Path:
        return self.root / f"{dataset_id}.ledger.ndjson"

    def create(self, dataset_id: str, total: PrivacyParams) -> BudgetLedger:
        return BudgetLedger(dataset_id, total, self.path_for(dataset_id))

    def load(self, dataset_id: str) -> BudgetLedger:
        return BudgetLedger.replay(self.path_for(dataset_id))

    def exists(self, dataset_id: str) -> bool:
        return self.path_for(dataset_id).exists()
