"""Synchronous baseline: one cross-chain transaction at a time with SPV proofs."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .chain import CancelRecord, CrossTx, Ledger, block_digest
from .errors import NotReady, UnknownTransaction
from .netsim import EventLoop, NetConfig, Network, run_until

PROVE_MS = 2.0
VERIFY_MS = 2.0


@dataclass(frozen=True)
class SpvProof:
    tx_id: bytes
    height: int
    record: bytes  # serialized transaction as stored in the block
    path: tuple  # (sibling digest, sibling_is_right)
    prev: bytes
    time: float
    confirmations: int


def _merkle_path(leaves: list[bytes], index: int) -> list[tuple[bytes, bool]]:
    path = []
    level = list(leaves)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        sib = index ^ 1
        path.append((level[sib], sib > index))
        level = [
            hashlib.sha256(b"\x01" + level[i] + level[i + 1]).digest()
            for i in range(0, len(level), 2)
        ]
        index //= 2
    return path


def spv_prove(ledger: Ledger, tx_id: bytes) -> SpvProof:
    height, index = ledger.position(tx_id)
    conf = ledger.tip_height - height
    if conf < ledger.k:
        raise NotReady(f"{conf} of {ledger.k} confirmations")
    block = ledger.block_at(height)
    path = _merkle_path(block.leaves(), index)
    return SpvProof(tx_id, height, block.records[index].to_bytes(), tuple(path), block.prev, block.time, conf)


def spv_verify(proof: SpvProof, header_digest: bytes) -> bool:
    try:
        tx = CrossTx.from_bytes(proof.record)
    except ValueError:
        return False
    if tx.id != proof.tx_id:
        return False
    node = hashlib.sha256(b"\x00" + proof.record).digest()
    for sibling, right in proof.path:
        pair = node + sibling if right else sibling + node
        node = hashlib.sha256(b"\x01" + pair).digest()
    return block_digest(proof.height, proof.prev, proof.time, node) == header_digest


@dataclass
class SequentialRun:
    mc: Ledger
    sc: Ledger
    outcomes: dict  # id -> (success, settle_ms, latency_ms, reason)
    intervals: list = field(default_factory=list)  # (start, end) per transaction
    order: list = field(default_factory=list)
    gen_ms: list = field(default_factory=list)
    ver_ms: list = field(default_factory=list)
    retransmissions: int = 0


def run_sequential(
    ctxs,
    net: NetConfig,
    k: int = 5,
    block_ms: float = 100.0,
    retransmissions: int = 0,
    trace=None,
) -> SequentialRun:
    """Run ``ctxs`` (``Arrival`` records) strictly one after another.

    Each transaction is sent, monitored block by block until stable, proven,
    transmitted, verified against the source header, recorded on the target
    and monitored again. A timed-out transmission waits out the timeout and
    then aborts with a cancel record on the source chain.
    """
    ctxs = sorted(ctxs, key=lambda a: (a.tx.timestamp, a.tx.id))
    loop = EventLoop(trace)
    network = Network(net, "strawman")
    mc, sc = Ledger("MC", k, block_ms), Ledger("SC", k, block_ms)
    run = SequentialRun(mc, sc, {})
    state = {"i": 0, "start": 0.0}

    def stable_at(ledger: Ledger, now: float) -> float:
        return ledger.next_block_time(now) + ledger.k * ledger.interval

    def begin() -> None:
        i = state["i"]
        if i >= len(ctxs):
            return
        a = ctxs[i]
        loop.at(max(loop.now, a.at), start, a, kind="start")

    def finish(a, ok: bool, settle: float, reason: str = "") -> None:
        run.outcomes[a.tx.id] = (ok, settle, settle - a.at if ok else 0.0, reason)
        run.intervals.append((state["start"], loop.now))
        state["i"] += 1
        begin()

    def start(a) -> None:
        state["start"] = loop.now
        run.order.append(a.tx.id)
        mc.advance_to(loop.now)
        mc.submit(a.tx)
        loop.at(stable_at(mc, loop.now), proven, a, 0, kind="stable-send")

    def proven(a, attempt: int) -> None:
        mc.advance_to(loop.now)
        proof = spv_prove(mc, a.tx.id)
        run.gen_ms.append(PROVE_MS)
        loop.after(PROVE_MS, transmit, a, proof, attempt, kind="prove")

    def transmit(a, proof, attempt: int) -> None:
        d = network.sample(loop.now)
        loop.log("send", "MC->SC", proof.record)
        if d.timed_out:
            loop.after(net.delta_async, timed_out, a, proof, attempt, kind="timeout")
        else:
            loop.at(d.due, delivered, a, proof, kind="deliver")

    def timed_out(a, proof, attempt: int) -> None:
        if attempt < retransmissions:
            run.retransmissions += 1
            transmit(a, proof, attempt + 1)
            return
        abort(a, "aborted")

    def abort(a, reason: str) -> None:
        mc.advance_to(loop.now)
        mc.submit(CancelRecord(a.tx.id))
        finish(a, False, stable_at(mc, loop.now), reason)

    def delivered(a, proof) -> None:
        run.ver_ms.append(VERIFY_MS)
        loop.after(VERIFY_MS, verified, a, proof, kind="verify")

    def verified(a, proof) -> None:
        mc.advance_to(loop.now)
        try:
            header = mc.block_at(proof.height).digest
        except KeyError:
            header = b""
        if not spv_verify(proof, header):
            abort(a, "bad-proof")
            return
        if any(not run.outcomes.get(d, (False,))[0] for d in a.tx.deps):
            abort(a, "conflict")
            return
        sc.advance_to(loop.now)
        sc.submit(a.tx.as_recv())
        loop.at(stable_at(sc, loop.now), recorded, a, kind="stable-recv")

    def recorded(a) -> None:
        sc.advance_to(loop.now)
        if not sc.is_stable(a.tx.id):
            raise UnknownTransaction(a.tx.id.hex())
        finish(a, True, loop.now)

    begin()
    run_until(loop)
    end = max((o[1] for o in run.outcomes.values()), default=0.0)
    mc.advance_to(end)
    sc.advance_to(end)
    return run
