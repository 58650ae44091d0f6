"""Budget ledger arithmetic, atomicity, and crash-safe persistence."""

import itertools
import json
import threading

import pytest

from dpvalid.accountant import (
    BudgetLedger,
    ChargeRecord,
    LedgerStore,
    compose_spent,
)
from dpvalid.errors import BudgetExceededError, InvalidParameterError, MalformedRequestError
from dpvalid.params import PrivacyParams


def _charge(eps, delta=0.0, qid="q", composition="sequential", group=None):
    return ChargeRecord(qid, PrivacyParams(eps, delta), composition=composition, group=group)


def test_compose_empty():
    assert compose_spent([]) == (0.0, 0.0)


def test_compose_sequential_sums():
    spent = compose_spent([_charge(1.0, 1e-7), _charge(2.0, 1e-7)])
    assert spent.epsilon == pytest.approx(3.0)
    assert spent.delta == pytest.approx(2e-7)


def test_compose_parallel_group_max():
    charges = [
        _charge(0.5, composition="parallel", group="bins"),
        _charge(1.5, composition="parallel", group="bins"),
        _charge(1.0, composition="parallel", group="bins"),
    ]
    assert compose_spent(charges).epsilon == pytest.approx(1.5)


def test_parallel_group_permutation_invariant():
    charges = [
        _charge(0.3, composition="parallel", group="g"),
        _charge(0.9, composition="parallel", group="g"),
        _charge(0.6, 1e-8, composition="parallel", group="g"),
        _charge(0.2),
    ]
    baseline = compose_spent(charges)
    for perm in itertools.permutations(charges):
        assert compose_spent(list(perm)) == baseline


def test_charge_record_validation():
    with pytest.raises(InvalidParameterError):
        ChargeRecord("q", PrivacyParams(1.0), composition="sideways")
    with pytest.raises(InvalidParameterError):
        ChargeRecord("q", PrivacyParams(1.0), composition="parallel")  # no group


def test_boundary_acceptance():
    ledger = BudgetLedger("d", PrivacyParams(5.0, 1e-6))
    remaining = ledger.try_charge(_charge(5.0, 1e-6))
    assert remaining.epsilon == pytest.approx(0.0)
    assert remaining.delta == pytest.approx(0.0)
    with pytest.raises(BudgetExceededError) as err:
        ledger.try_charge(_charge(0.01))
    assert err.value.remaining_epsilon == pytest.approx(0.0)


def test_float_sum_tolerance():
    # fifty 0.1-charges must land exactly on a 5.0 budget despite binary floats
    ledger = BudgetLedger("d", PrivacyParams(5.0, 0.0))
    for i in range(50):
        ledger.try_charge(_charge(0.1, qid=f"q{i}"))
    with pytest.raises(BudgetExceededError):
        ledger.try_charge(_charge(0.1))


def test_preview_mirrors_try_charge():
    ledger = BudgetLedger("d", PrivacyParams(5.0, 1e-6))
    ok = ledger.preview_charge(_charge(5.0, 1e-6))
    assert ok.accepted
    assert ok.remaining_after == (0.0, 0.0)
    assert ledger.spent() == (0.0, 0.0)  # preview is pure

    ledger.try_charge(_charge(5.0, 1e-6))
    denied = ledger.preview_charge(_charge(0.5))
    assert not denied.accepted


def test_spent_monotone():
    ledger = BudgetLedger("d", PrivacyParams(10.0, 1e-3))
    seen = [ledger.spent()]
    for i in range(6):
        ledger.try_charge(_charge(0.5, 1e-6, qid=f"q{i}"))
        seen.append(ledger.spent())
    for before, after in zip(seen, seen[1:]):
        assert after.epsilon >= before.epsilon
        assert after.delta >= before.delta


def test_concurrent_charges_accept_exact_count():
    ledger = BudgetLedger("d", PrivacyParams(5.0, 0.0))
    outcomes = []
    lock = threading.Lock()

    def worker(i):
        try:
            ledger.try_charge(_charge(0.1, qid=f"q{i}"))
            ok = True
        except BudgetExceededError:
            ok = False
        with lock:
            outcomes.append(ok)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(100)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sum(outcomes) == 50
    # serializability oracle: replaying the accepted set sequentially accepts all of it
    replay = BudgetLedger("d2", PrivacyParams(5.0, 0.0))
    for c in ledger.charges:
        replay.try_charge(c)
    assert replay.spent() == ledger.spent()


def test_ledger_file_roundtrip(tmp_path):
    path = tmp_path / "d.ledger.ndjson"
    ledger = BudgetLedger("d", PrivacyParams(3.0, 1e-6), path)
    ledger.try_charge(_charge(1.0, 1e-7, qid="a"))
    ledger.try_charge(_charge(0.25, qid="b", composition="parallel", group="bins"))

    replayed = BudgetLedger.replay(path)
    assert replayed.dataset_id == "d"
    assert replayed.total == PrivacyParams(3.0, 1e-6)
    assert replayed.spent() == ledger.spent()
    assert [c.query_id for c in replayed.charges] == ["a", "b"]
    assert replayed.charges[1].group == "bins"


def test_crash_between_write_and_return(tmp_path):
    """The file records a charge even if the caller never saw the result."""
    path = tmp_path / "d.ledger.ndjson"
    ledger = BudgetLedger("d", PrivacyParams(1.0, 0.0), path)
    ledger.try_charge(_charge(0.7))
    del ledger  # simulated crash: in-memory state gone, file remains
    replayed = BudgetLedger.replay(path)
    assert replayed.spent().epsilon == pytest.approx(0.7)
    with pytest.raises(BudgetExceededError):
        replayed.try_charge(_charge(0.5))


def test_replay_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text(json.dumps({"kind": "mystery"}) + "\n", encoding="utf-8")
    with pytest.raises(MalformedRequestError):
        BudgetLedger.replay(path)
    path.write_text(json.dumps({"kind": "charge", "query_id": "q", "epsilon": 1.0,
                                "delta": 0.0, "composition": "sequential", "group": None,
                                "timestamp": 0.0}) + "\n", encoding="utf-8")
    with pytest.raises(MalformedRequestError):
        BudgetLedger.replay(path)  # header line missing


def test_store_paths(tmp_path):
    store = LedgerStore(tmp_path)
    ledger = store.create("alpha", PrivacyParams(1.0, 0.0))
    assert store.exists("alpha")
    assert not store.exists("beta")
    ledger.try_charge(_charge(0.5))
    assert store.load("alpha").spent().epsilon == pytest.approx(0.5)
