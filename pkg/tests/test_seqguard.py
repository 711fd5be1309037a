import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncsc.chain import CrossTxSet, Ledger
from asyncsc.committee import Node
from asyncsc.das import sign
from asyncsc.errors import AuthorizationError, Backpressure, ConfigurationError, ConfirmationError, InputError
from asyncsc.seqguard import (
    ABORTED,
    APPLY,
    CONFIRMED,
    CONFLICT,
    HOLD,
    ORDERED,
    PROCESSING,
    RECEIVED,
    REMOVED,
    BufferEntry,
    BufferPool,
    CertificateAuthority,
    SequenceChecker,
    SequenceView,
    check_certificate,
    confirm,
    conflict_check,
    export_sequence_view,
    order_digest,
    priority_key,
    remove_stable,
    verify_view,
)

from .helpers import make_set, make_tx


def tid(i: int) -> bytes:
    return i.to_bytes(16, "big")


@pytest.fixture
def leader(keys):
    return keys[0]


@pytest.fixture
def ca(keys):
    return CertificateAuthority("root", keys[1])


@pytest.fixture
def cert(ca, keys):
    return ca.issue("SC-leader", keys[2].pk, 0.0, 1000.0)


def ordered_ids(pool: BufferPool, rounds: int = 50) -> list[bytes]:
    out = []
    for _ in range(rounds):
        out.extend(e.tx.id for e in pool.order_window())
    return out


# -- pool ------------------------------------------------------------------


def test_timestamp_policy_orders_by_timestamp():
    pool = BufferPool(policy="timestamp")
    pool.enqueue(CrossTxSet(0, (make_tx(1, ts=30), make_tx(2, ts=10), make_tx(3, ts=20))))
    assert ordered_ids(pool) == [tid(2), tid(3), tid(1)]


def test_importance_policy_orders_by_weight():
    pool = BufferPool(policy="importance")
    pool.enqueue(CrossTxSet(0, (make_tx(1, weight=5), make_tx(2, weight=50), make_tx(3, weight=5))))
    assert ordered_ids(pool) == [tid(2), tid(1), tid(3)]


def test_dependency_dominates_timestamp():
    pool = BufferPool(policy="dependency")
    a = make_tx(1, ts=50)
    b = make_tx(2, ts=10, deps=[a.id])
    pool.enqueue(CrossTxSet(0, (b, a)))
    assert ordered_ids(pool) == [a.id, b.id]
    assert pool.entries[b.id].level == pool.entries[a.id].level + 1


def test_dependency_on_missing_tx_waits():
    pool = BufferPool()
    pool.enqueue(CrossTxSet(0, (make_tx(2, deps=[tid(1)]),)))
    assert pool.order_window() == []
    pool.enqueue(CrossTxSet(1, (make_tx(1, epoch=1),)))
    # the waiter is released within the same window pass
    assert [e.tx.id for e in pool.order_window()] == [tid(1), tid(2)]


def test_backpressure_at_capacity():
    pool = BufferPool(capacity=2000)
    pool.enqueue(CrossTxSet(0, tuple(make_tx(i) for i in range(2000))))
    with pytest.raises(Backpressure) as info:
        pool.enqueue(make_set([2000]))
    assert info.value.rejected == 1
    with pytest.raises(InputError):
        BufferPool().enqueue(CrossTxSet(0, (make_tx(1), make_tx(1))))


def test_window_slice_and_adaptation():
    pool = BufferPool(capacity=2000, window=400, policy="timestamp")
    pool.enqueue(CrossTxSet(0, tuple(make_tx(i) for i in range(1000))))
    assert len(pool.order_window(traffic=1000)) == 400
    assert pool.window == 400
    pool.order_window(traffic=100)
    assert pool.window == 300
    pool.order_window(traffic=100)
    assert pool.window == 300  # clamped at the floor
    pool.order_window(traffic=1900)
    assert pool.window == 375


def test_empty_pool_gives_empty_slice():
    assert BufferPool().order_window() == []


def test_bad_pool_configuration():
    with pytest.raises(ConfigurationError):
        BufferPool(policy="fifo")
    with pytest.raises(ConfigurationError):
        BufferPool(capacity=0)


def test_entry_transitions():
    e = BufferEntry(make_tx(1), ())
    with pytest.raises(InputError):
        e.advance(PROCESSING)
    for state in (ORDERED, PROCESSING, CONFIRMED, REMOVED):
        e.advance(state)
    assert e.state == REMOVED


def test_priority_keys():
    tx = make_tx(3, ts=7, weight=9)
    assert priority_key(tx, "timestamp") == (7.0, tx.id)
    assert priority_key(tx, "importance") == (-9, 7.0, tx.id)
    assert priority_key(tx, "dependency", 2) == (2, -9, 7.0, tx.id)


@st.composite
def dag(draw):
    n = draw(st.integers(1, 40))
    txs = []
    for i in range(n):
        deps = draw(st.sets(st.integers(0, i - 1), max_size=3)) if i else set()
        txs.append(make_tx(i, ts=draw(st.integers(0, 100)), weight=draw(st.integers(1, 100)),
                           deps=[tid(d) for d in sorted(deps)]))
    return txs, draw(st.permutations(range(n))), draw(st.integers(1, 10))


@settings(max_examples=150)
@given(dag())
def test_dependency_dominance_property(case):
    txs, perm, window = case
    pool = BufferPool(window=window, window_min=1)
    for i in perm:
        pool.enqueue(CrossTxSet(0, (txs[i],)))
        pool.order_window()
    ordered = ordered_ids(pool, rounds=len(txs) + 1)
    positions = {r[0]: r[2] for r in pool.records}
    assert len(positions) == len(txs)
    for tx in txs:
        assert all(positions[d] < positions[tx.id] for d in tx.deps)
    assert [r[2] for r in pool.records] == list(range(len(txs)))
    assert set(ordered) <= set(positions)


@settings(max_examples=60)
@given(st.integers(1, 60), st.data())
def test_pool_conservation(n, data):
    pool = BufferPool(policy="timestamp")
    pool.enqueue(CrossTxSet(0, tuple(make_tx(i) for i in range(n))))
    pool.order_window()
    fates = data.draw(st.lists(st.sampled_from([REMOVED, CONFLICT, ABORTED]), min_size=n, max_size=n))
    ledger = Ledger("SC", 0, 100)
    for i, fate in enumerate(fates):
        if fate == REMOVED:
            pool.mark_processing([tid(i)])
            ledger.submit(make_tx(i).as_recv())
        else:
            pool.discard(tid(i), fate)
    ledger.advance_to(100)
    remove_stable(pool, ledger)
    assert len(pool) == 0
    assert pool.received_total == sum(pool.left.values()) == n
    assert not pool.discard(tid(0), CONFLICT)


def test_discard_unordered_entry_frees_capacity():
    pool = BufferPool(capacity=3, policy="timestamp")
    pool.enqueue(make_set([1, 2, 3]))
    assert pool.free == 0
    pool.discard(tid(2), ABORTED)
    assert pool.free == 1
    assert ordered_ids(pool) == [tid(1), tid(3)]


def test_pool_dump(keys):
    pool = BufferPool(policy="timestamp")
    pool.enqueue(make_set([1]))
    out = io.StringIO()
    pool.dump(out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "id,level,state,priority_key"
    assert lines[1].startswith(f"{tid(1).hex()},0,{RECEIVED},")


# -- removal ---------------------------------------------------------------


def _processing_pool(n):
    pool = BufferPool(policy="timestamp")
    pool.enqueue(CrossTxSet(0, tuple(make_tx(i) for i in range(n))))
    pool.mark_processing([e.tx.id for e in pool.order_window()])
    return pool


def test_remove_stable_cases():
    pool = _processing_pool(4)
    ledger = Ledger("SC", 2, 100)
    assert remove_stable(pool, ledger) == []
    ledger.submit(make_tx(0).as_recv())
    ledger.submit(make_tx(1).as_recv())
    ledger.advance_to(100)
    ledger.submit(make_tx(2).as_recv())
    ledger.advance_to(300)
    dump = io.StringIO()
    ledger.dump(dump)
    # oracle: ids in blocks at least k below the tip, read back from the dump
    stable = set()
    for line in dump.getvalue().splitlines()[1:]:
        height, _, ids = line.split(",")
        if ledger.tip_height - int(height) >= ledger.k:
            stable |= {bytes.fromhex(x) for x in ids.split()}
    assert set(remove_stable(pool, ledger)) == stable == {tid(0), tid(1)}
    assert remove_stable(pool, ledger) == []
    ledger.submit(make_tx(3).as_recv())
    ledger.advance_to(600)
    assert set(remove_stable(pool, ledger)) == {tid(2), tid(3)}
    assert len(pool) == 0


# -- confirmation ----------------------------------------------------------


def _nodes(keys, m=5):
    return [Node(f"n{i}", keys[i]) for i in range(m)]


def test_confirm_quorum(keys):
    committee = _nodes(keys)
    pool = _processing_pool(3)
    entries = list(pool.entries.values())
    assert all(e.state == CONFIRMED for e in confirm(entries, committee))
    pool = _processing_pool(3)
    entries = list(pool.entries.values())
    assert confirm(entries, committee, attesting=["n0", "n1", "n2"]) == entries
    pool = _processing_pool(3)
    entries = list(pool.entries.values())
    with pytest.raises(ConfirmationError):
        confirm(entries, committee, attesting=["n0", "n1", "outsider"])
    assert all(e.state == PROCESSING for e in entries)


def test_order_digest_depends_on_order():
    assert order_digest([tid(1), tid(2)]) != order_digest([tid(2), tid(1)])


# -- certificates and views ------------------------------------------------


def test_export_view_hides_payloads(leader, ca, cert):
    pool = BufferPool(policy="timestamp", owner=leader)
    secret = b"SENSOR-READING-\xde\xad\xbe\xef"
    pool.enqueue(CrossTxSet(0, tuple(make_tx(i, payload=secret) for i in range(5))))
    pool.order_window()
    view = export_sequence_view(pool, cert, ca.pk, now=10)
    raw = view.to_bytes()
    assert secret not in raw
    assert SequenceView.from_bytes(raw) == view
    verify_view(view, leader.pk)
    assert [r[2] for r in view.records] == list(range(5))
    partial = export_sequence_view(pool, cert, ca.pk, now=10, start=3)
    assert [r[2] for r in partial.records] == [3, 4]


def test_self_signed_and_expired_certificates_rejected(keys, leader, ca, cert):
    pool = BufferPool(owner=leader)
    rogue = CertificateAuthority("root", keys[2]).issue("SC-leader", keys[2].pk, 0.0, 1000.0)
    with pytest.raises(AuthorizationError):
        export_sequence_view(pool, rogue, ca.pk, now=10)
    with pytest.raises(AuthorizationError):
        export_sequence_view(pool, cert, ca.pk, now=1000.5)
    with pytest.raises(AuthorizationError):
        check_certificate(cert, ca.pk, now=-1)
    check_certificate(cert, ca.pk, now=1000)


def test_view_signature_and_positions_checked(leader, keys):
    recs = ((tid(1), 0, 0), (tid(2), 0, 1))
    good = SequenceView(recs, sign(leader.sk, SequenceView.unsigned_body(recs)).sigma)
    verify_view(good, leader.pk)
    with pytest.raises(AuthorizationError):
        verify_view(good, keys[3].pk)
    bad_recs = ((tid(1), 0, 1), (tid(2), 0, 1))
    bad = SequenceView(bad_recs, sign(leader.sk, SequenceView.unsigned_body(bad_recs)).sigma)
    with pytest.raises(AuthorizationError):
        verify_view(bad, leader.pk)
    with pytest.raises(InputError):
        SequenceView.from_bytes(good.to_bytes()[:-1])


# -- conflict checking -----------------------------------------------------


def _view(leader, ca, cert, sets):
    pool = BufferPool(policy="timestamp", window=1000, owner=leader)
    for s in sets:
        pool.enqueue(s)
    pool.order_window()
    return export_sequence_view(pool, cert, ca.pk, now=1)


def test_conflict_check_cases(leader, ca, cert):
    e0 = CrossTxSet(0, tuple(make_tx(i, 0) for i in range(3)))
    e1 = CrossTxSet(1, tuple(make_tx(i, 1, deps=[tid(0)] if i == 3 else ()) for i in range(3, 6)))
    view = _view(leader, ca, cert, [e0, e1])
    assert set(conflict_check(view, e1, e0.ids, leader.pk).values()) == {APPLY}
    assert set(conflict_check(view, e1, [], leader.pk).values()) == {HOLD}
    after_abort = conflict_check(view, e1, e0.ids[1:], leader.pk, aborted=[tid(0)])
    assert after_abort[tid(3)] == CONFLICT
    assert after_abort[tid(4)] == APPLY
    unsigned = SequenceView(view.records, b"")
    with pytest.raises(AuthorizationError):
        conflict_check(unsigned, e1, e0.ids, leader.pk)


def test_checker_holds_until_predecessor_arrives(leader, ca, cert):
    e0, e1 = make_set([1, 2], 0), CrossTxSet(1, (make_tx(3, 1, deps=[tid(1)]),))
    view = _view(leader, ca, cert, [e0, e1])
    chk = SequenceChecker(leader.pk)
    assert chk.absorb(view) == 3
    assert chk.absorb(view) == 0
    assert chk.offer(e1)
    assert chk.advance() == []
    assert chk.blocked_on == tid(1)
    assert chk.offer(e0)
    assert not chk.offer(e0)
    settled = [(x.id, v) for x, v in chk.advance()]
    assert settled == [(tid(1), APPLY), (tid(2), APPLY), (tid(3), APPLY)]
    assert chk.blocked_on is None


def test_checker_aborted_dependency_conflicts(leader, ca, cert):
    e0, e1 = make_set([1], 0), CrossTxSet(1, (make_tx(3, 1, deps=[tid(1)]),))
    chk = SequenceChecker(leader.pk)
    chk.absorb(_view(leader, ca, cert, [e0, e1]))
    chk.offer(e1)
    settled = chk.advance(cancelled={tid(1)})
    assert settled[0] == (tid(1), ABORTED)
    assert settled[1][1] == CONFLICT


def test_checker_rejects_gap(leader, ca, cert):
    recs = ((tid(1), 0, 2),)
    view = SequenceView(recs, sign(leader.sk, SequenceView.unsigned_body(recs)).sigma)
    with pytest.raises(AuthorizationError):
        SequenceChecker(leader.pk).absorb(view)
