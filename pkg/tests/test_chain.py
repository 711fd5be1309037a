import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncsc.chain import (
    CancelRecord,
    CrossTx,
    CrossTxSet,
    EpochClock,
    Ledger,
    block_digest,
    ideal_delay,
    measure_timing,
    merkle_root,
    pack_epoch,
)
from asyncsc.errors import InputError, TimingError, UnknownTransaction

from .helpers import make_set, make_tx

tx_strategy = st.builds(
    CrossTx,
    id=st.binary(min_size=16, max_size=16),
    epoch=st.integers(0, 2**32 - 1),
    direction=st.sampled_from(["send", "recv"]),
    source=st.text(max_size=8),
    target=st.text(max_size=8),
    payload=st.binary(max_size=64),
    timestamp=st.integers(0, 10**9).map(lambda us: us / 1000),
    weight=st.integers(0, 2**32 - 1),
    deps=st.lists(st.binary(min_size=16, max_size=16), max_size=3).map(tuple),
)


@settings(max_examples=200)
@given(tx_strategy)
def test_tx_round_trip(tx):
    assert CrossTx.from_bytes(tx.to_bytes()) == tx


def test_tx_decode_rejects_garbage():
    raw = make_tx(1).to_bytes()
    with pytest.raises(InputError):
        CrossTx.from_bytes(raw[:-3])
    with pytest.raises(InputError):
        CrossTx.from_bytes(raw + b"\x00")


def test_recv_half_keeps_the_id():
    tx = make_tx(7)
    recv = tx.as_recv()
    assert recv.id == tx.id and recv.direction == "recv"


def test_set_invariants():
    with pytest.raises(InputError):
        CrossTxSet(0, ())
    with pytest.raises(InputError):
        CrossTxSet(0, (make_tx(1, 0), make_tx(2, 1)))
    s = make_set([1, 2, 3])
    assert CrossTxSet.from_bytes(s.to_bytes()) == s
    assert CrossTxSet.from_bytes(s.to_bytes()).digest == s.digest


@settings(max_examples=100)
@given(st.integers(0, 4), st.integers(0, 2), st.integers(0, 255))
def test_set_digest_changes_with_any_member_byte(member, which, value):
    s = make_set([1, 2, 3, 4, 5])
    tx = s.txs[member]
    if which == 0:
        new = make_tx(member + 1, payload=bytes([value, 1]))
    elif which == 1:
        new = make_tx(member + 1, ts=tx.timestamp + 0.001 * (value + 1))
    else:
        new = make_tx(member + 1, weight=tx.weight + value + 1)
    txs = list(s.txs)
    txs[member] = new
    assert CrossTxSet(0, tuple(txs)).digest != s.digest


def test_pack_epoch_sorts_by_timestamp_then_id():
    txs = [make_tx(3, ts=30), make_tx(1, ts=10), make_tx(2, ts=20)]
    assert [t.timestamp for t in pack_epoch(txs, 0).txs] == [10, 20, 30]
    tied = [make_tx(9, ts=5), make_tx(4, ts=5)]
    assert pack_epoch(tied, 0).ids == sorted(t.id for t in tied)
    assert pack_epoch([], 3) is None
    with pytest.raises(InputError):
        pack_epoch([make_tx(1, epoch=2)], 3)


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 10**6)), min_size=1, max_size=30, unique_by=lambda p: p[1]))
def test_pack_epoch_matches_sort_oracle_and_is_idempotent(pairs):
    txs = [make_tx(i, ts=ts) for ts, i in pairs]
    random.Random(len(txs)).shuffle(txs)
    packed = pack_epoch(txs, 0)
    expected = sorted(((t.timestamp, t.id) for t in txs))
    assert [(t.timestamp, t.id) for t in packed.txs] == expected
    assert pack_epoch(reversed(txs), 0).digest == packed.digest
    assert pack_epoch(packed.txs, 0) == packed


def test_append_block_spacing_and_timing_error():
    ledger = Ledger("MC", 5, 100)
    empty = ledger.append_block([], 100)
    assert empty.height == 1 and empty.records == ()
    for i in range(100):
        b = ledger.append_block([make_tx(i)], 200 + 100 * i)
        assert b.height == i + 2
        assert b.time == pytest.approx(100 * b.height)
    with pytest.raises(TimingError):
        ledger.append_block([], ledger.tip_time + 50)


def test_blocks_link_and_digest():
    ledger = Ledger("MC", 2, 100)
    ledger.submit(make_tx(1))
    ledger.advance_to(300)
    first = ledger.block_at(1)
    assert first.prev == ledger.block_at(0).digest
    assert first.digest == block_digest(1, first.prev, 100.0, merkle_root(first.leaves()))
    assert ledger.tip_height == 3


def test_stability_boundaries():
    ledger = Ledger("MC", 5, 100)
    ledger.submit(make_tx(1))
    ledger.advance_to(100)
    h = ledger.height_of(make_tx(1).id)
    ledger.advance_to(100 * (h + 4))
    assert not ledger.is_stable(make_tx(1).id)
    ledger.advance_to(100 * (h + 5))
    assert ledger.is_stable(make_tx(1).id)
    assert ledger.stable_time(make_tx(1).id) == 100 * (h + 5)
    zero = Ledger("SC", 0, 100)
    zero.submit(make_tx(2))
    zero.advance_to(100)
    assert zero.is_stable(make_tx(2).id)
    with pytest.raises(UnknownTransaction):
        zero.is_stable(make_tx(99).id)


@given(st.lists(st.integers(0, 30), min_size=1, max_size=20), st.integers(0, 6))
def test_stability_is_monotone(gaps, k):
    ledger = Ledger("MC", k, 100)
    tid = make_tx(1).id
    ledger.submit(make_tx(1))
    ledger.advance_to(100)
    seen = False
    now = 100
    for g in gaps:
        now += 100 * g
        ledger.advance_to(now)
        stable = ledger.is_stable(tid)
        # independent count of successor blocks
        assert stable == (ledger.tip_height - 1 >= k)
        assert stable or not seen
        seen = stable


def test_cancel_records_are_tracked_separately():
    ledger = Ledger("MC", 1, 100)
    ledger.submit(make_tx(1))
    ledger.advance_to(100)
    ledger.submit(CancelRecord(make_tx(1).id))
    ledger.advance_to(300)
    tid = make_tx(1).id
    assert ledger.contains(tid) and ledger.is_cancelled(tid)
    assert not ledger.is_effective(tid)
    assert ledger.cancel_height(tid) == 2
    assert ledger.ordered_ids() == [tid]
    out = io.StringIO()
    ledger.dump(out)
    assert out.getvalue().splitlines() == [
        "height,time_ms,tx_ids",
        f"1,100.000,{tid.hex()}",
        f"2,200.000,x{tid.hex()}",
    ]


def test_next_block_time():
    ledger = Ledger("MC", 5, 100)
    assert ledger.next_block_time(0) == 100
    assert ledger.next_block_time(150) == 200
    assert ledger.next_block_time(200) == 200
    ledger.advance_to(200)
    assert ledger.next_block_time(200) == 300


def test_epoch_clock():
    clock = EpochClock(600)
    assert clock.epoch_of(0) == 0 and clock.epoch_of(599.9) == 0 and clock.epoch_of(600) == 1
    assert clock.start_of(3) == 1800 and clock.end_of(3) == 2400


def test_measure_timing_and_ideal_delay():
    clock = EpochClock(600)
    ledger = Ledger("MC", 5, 100)
    s = make_set([1, 2])
    for tx in s.txs:
        ledger.submit(tx)
    ledger.advance_to(600)  # records land in block 1 at 100 ms
    assert measure_timing(ledger, s, clock) == (500.0, 500.0)
    late = Ledger("MC", 5, 100)
    late.advance_to(500)
    for tx in s.txs:
        late.submit(tx)
    late.advance_to(600)
    assert measure_timing(late, s, clock) == (500.0, 0.0)
    assert ideal_delay(500, 120, 40) == 340
    with pytest.raises(UnknownTransaction):
        measure_timing(Ledger(), s, clock)
