"""End-to-end AsyncSC run between a source chain (MC) and a target chain (SC).

Cryptography is real (small delay parameter); durations that would depend on
the host are modeled so every run is reproducible:

* signing round: ``signing_time_ms(m)``
* aggregation work at the leader: ``aggregation_time_ms(m, n)`` plus the
  target delay, executed by one serial worker
* proof verification on SC: ``verification_time_ms(n)``
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import random
from dataclasses import dataclass, field

from ..acp import Acp, build_acp, verify_acp
from ..chain import CancelRecord, EpochClock, Ledger, pack_epoch
from ..committee import committee_sign, elect, make_org, signing_time_ms
from ..das import key_gen, par_gen, sign
from ..das.keys import aggregate_sigs
from ..errors import InputError, RunError
from ..netsim import EventLoop, Network, run_until
from ..seqguard import (
    ABORTED,
    APPLY,
    CONFLICT,
    ORDERED,
    BufferEntry,
    BufferPool,
    CertificateAuthority,
    SequenceChecker,
    confirm,
    export_sequence_view,
    remove_stable,
)
from .scenario import Scenario
from .workload import make_workload


def aggregation_time_ms(m: int, n: int) -> float:
    # about 12 ms for five signers and 1200 transactions
    return 1.0 * m + 0.006 * n


def verification_time_ms(n: int) -> float:
    return 60.0 + 0.02 * n


@dataclass
class SetTrack:
    """Source-side bookkeeping for one CrossTxSet and its proof."""

    txset: object
    packed_at: float
    signed_at: float = 0.0
    built_at: float = 0.0
    raw: bytes = b""
    sends: int = 0
    acked: bool = False
    accepted_at: float | None = None
    aborted: bool = False
    gen_ms: float = 0.0
    rounds: int = 1
    settled_at: float = 0.0


@dataclass
class Outcome:
    success: bool
    settle_ms: float
    latency_ms: float = 0.0
    reason: str = ""


@dataclass
class RunArtifacts:
    scenario: Scenario
    mc: Ledger
    sc: Ledger
    pool: BufferPool
    outcomes: dict
    tracks: list
    rejections: dict = field(default_factory=dict)
    retransmissions: int = 0
    duration_ms: float = 0.0
    view_records: list = field(default_factory=list)
    arrivals: dict = field(default_factory=dict)
    gen_ms: list = field(default_factory=list)
    ver_ms: list = field(default_factory=list)
    intervals: list = field(default_factory=list)


class AsyncScRun:
    def __init__(self, s: Scenario, trace=None):
        self.s = s
        self.loop = EventLoop(trace)
        self.clock = EpochClock(s.epoch_ms)
        self.net = Network(s.net())
        self.faults = random.Random(f"{s.seed}:faults")

        sp, pp = par_gen(s.security_bits, s.delay_steps, seed=f"asyncsc-sim:{s.seed}")
        self.ek, self.vk = pp.ek, pp.vk
        mc_org = make_org("mc", s.org_size, sp, s.seed)
        sc_org = make_org("sc", s.org_size, sp, s.seed)
        mc_period = elect(mc_org, s.m, seed=f"{s.seed}:mc")
        sc_period = elect(sc_org, s.m, seed=f"{s.seed}:sc")
        by_id = {n.id: n for n in mc_org + sc_org}
        self.mc_committee = [by_id[i] for i in mc_period.committee]
        self.sc_committee = [by_id[i] for i in sc_period.committee]
        self.roster = [n.pk for n in self.mc_committee]
        mc_leader = by_id[mc_period.leader]
        sc_leader = by_id[sc_period.leader]
        ca = CertificateAuthority("root-ca", key_gen(sp, random.Random(f"{s.seed}:ca")))
        self.ca_pk = ca.pk
        sc_leader.certificate = ca.issue(sc_leader.id, sc_leader.pk, 0.0, 1e12)
        self.sc_cert = sc_leader.certificate
        self.forger = mc_leader.keys

        self.mc = Ledger("MC", s.k, s.block_ms)
        self.sc = Ledger("SC", s.k, s.block_ms)
        self.pool = BufferPool(
            capacity=s.queue_size, window=s.window, policy=s.policy,
            window_min=s.window_min, owner=mc_leader.keys,
        )
        self.checker = SequenceChecker(mc_leader.pk)

        self.arrivals = make_workload(
            s.n, s.arrival_rate, s.dep_ratio, s.upload_max_ms, s.epoch_ms, s.seed
        )
        self.arrived_at = {a.tx.id: a.at for a in self.arrivals}
        self._next_arrival = 0
        self.pending: list = []
        self.worker_free = 0.0
        self.tracks: dict[bytes, SetTrack] = {}
        self.sent_ids: set[bytes] = set()
        self.accepted_raw: set[bytes] = set()
        self.verdicts: list = []
        self._verdict_cursor = 0
        self.awaiting_recv: list[bytes] = []
        self.awaiting_cancel: list[bytes] = []
        self.applied_unconfirmed: list[bytes] = []
        self.outcomes: dict[bytes, Outcome] = {}
        self.cancel_reason: dict[bytes, str] = {}
        self.rejections: dict[str, int] = {}
        self.retransmissions = 0
        self.guard_ms = (
            s.n / s.arrival_rate * 1000
            + (s.max_retransmissions + 2) * s.delta_async_ms * 4
            + 600_000
        )

    # -- driver --------------------------------------------------------
    def run(self) -> RunArtifacts:
        self.loop.at(self.s.block_ms, self._tick, kind="tick")
        run_until(self.loop)
        s = self.s
        for tr in self.tracks.values():
            ids = tr.txset.ids
            tr.settled_at = max(self.outcomes[i].settle_ms for i in ids)
        duration = max((o.settle_ms for o in self.outcomes.values()), default=0.0)
        return RunArtifacts(
            s, self.mc, self.sc, self.pool, self.outcomes, list(self.tracks.values()),
            dict(self.rejections), self.retransmissions, duration,
            list(self.pool.records), self.arrived_at,
        )

    def _tick(self) -> None:
        s, now = self.s, self.loop.now
        while self._next_arrival < len(self.arrivals) and self.arrivals[self._next_arrival].at <= now:
            tx = self.arrivals[self._next_arrival].tx
            self.mc.submit(tx)
            self.pending.append(tx)
            self._next_arrival += 1
        self.mc.advance_to(now)
        self.sc.advance_to(now)
        self._settle()

        for e in self.pool.order_window():
            if e.tx.id in self.sent_ids:
                self.pool.mark_processing([e.tx.id])
        self._sync_source()
        self._target_progress()

        if now % s.epoch_ms == 0:
            self._pack(self.clock.epoch_of(now) - 1)

        if len(self.outcomes) == s.n and now >= max(o.settle_ms for o in self.outcomes.values()):
            return  # settled: remaining events are stale deliveries
        if now > self.guard_ms:
            raise RunError(f"run {s.id} not settled after {now:.0f} ms simulated")
        self.loop.after(s.block_ms, self._tick, kind="tick")

    def _settle(self) -> None:
        keep = []
        for tid in self.awaiting_recv:
            if self.sc.contains(tid):
                t = self.sc.stable_time(tid)
                self.outcomes[tid] = Outcome(True, t, t - self.arrived_at[tid])
            else:
                keep.append(tid)
        self.awaiting_recv = keep
        keep = []
        for tid in self.awaiting_cancel:
            h = self.mc.cancel_height(tid)
            if h is not None:
                settle = (h + self.mc.k) * self.mc.interval
                self.outcomes[tid] = Outcome(False, settle, reason=self.cancel_reason[tid])
            else:
                keep.append(tid)
        self.awaiting_cancel = keep

    # -- source chain ----------------------------------------------------
    def _pack(self, epoch: int) -> None:
        end = self.clock.end_of(epoch)
        cands = [tx for tx in self.pending if self.arrived_at[tx.id] < end]
        if not cands:
            return
        later = [tx for tx in self.pending if self.arrived_at[tx.id] >= end]
        cands.sort(key=lambda tx: (tx.timestamp, tx.id))
        # a full pool pushes the overflow into the next epoch's set
        members = cands[: self.pool.free]
        self.pending = cands[len(members) :] + later
        if not members:
            return
        members = [tx if tx.epoch == epoch else dataclasses.replace(tx, epoch=epoch) for tx in members]
        txset = pack_epoch(members, epoch)
        self.pool.enqueue(txset)
        rnd = committee_sign(txset, self.mc_committee)
        track = SetTrack(txset, end)
        self.tracks[txset.digest] = track
        self.loop.at(end + signing_time_ms(self.s.m), self._signed, track, rnd, kind="signed")

    def _signed(self, track: SetTrack, rnd) -> None:
        s, now = self.s, self.loop.now
        track.signed_at = now
        start = max(now, self.worker_free)
        agg = aggregation_time_ms(s.m, len(track.txset))
        # the proof must certify that the last member is stable; when one
        # delay is not enough the evaluation is chained for another round
        need = max(self.mc.stable_time(tx.id) for tx in track.txset.txs)
        rounds = max(1, math.ceil((need - start - agg) / s.delta_ms - 1e-9))
        track.rounds = rounds
        track.gen_ms = agg + rounds * s.delta_ms
        self.worker_free = start + track.gen_ms
        self.loop.at(self.worker_free, self._built, track, rnd, kind="built")

    def _built(self, track: SetTrack, rnd) -> None:
        track.built_at = self.loop.now
        acp = build_acp(track.txset, rnd.pairs, self.ek, self.vk, self.roster)
        if track.txset.epoch == self.s.forge_epoch:
            # the aggregate is swapped for one over a different message
            bogus = sign(self.forger.sk, b"forged" + track.txset.digest)
            c = dataclasses.replace(acp.commitment, sigma=aggregate_sigs([bogus]))
            acp = dataclasses.replace(acp, commitment=c)
        track.raw = acp.to_bytes()
        for tid in track.txset.ids:
            self.sent_ids.add(tid)
        self.pool.mark_processing(track.txset.ids)
        self._send(track)

    def _send(self, track: SetTrack) -> None:
        s = self.s
        track.sends += 1
        if track.sends > 1:
            self.retransmissions += 1
        copies = 2 if self.faults.random() < s.duplicate_ratio else 1
        for _ in range(copies):
            self._transmit(track.raw, "MC", "SC", self._deliver_acp)
        self.loop.after(s.delta_async_ms, self._timer, track, track.sends, kind="timer")

    def _transmit(self, msg: bytes, src: str, dst: str, handler) -> None:
        d = self.net.sample(self.loop.now)
        due = d.due
        if not d.timed_out and self.faults.random() < self.s.reorder_ratio:
            room = self.s.delta_async_ms - d.delay - 1.0
            due += self.faults.uniform(min(1000.0, room), min(5000.0, room))
            d = dataclasses.replace(d, due=due)
        self.loop.log("send", f"{src}->{dst}", msg)
        self.loop.at(due, handler, msg, d, kind=f"deliver:{src}->{dst}")

    def _timer(self, track: SetTrack, seq: int) -> None:
        if track.acked or track.aborted or seq != track.sends:
            return
        if track.sends <= self.s.max_retransmissions:
            self._send(track)
            return
        if track.accepted_at is not None:
            track.acked = True  # learned by reading the target chain
            return
        track.aborted = True
        self.loop.log("abort", "MC", track.txset.digest)
        for tid in track.txset.ids:
            self._cancel(tid, ABORTED)

    def _cancel(self, tid: bytes, reason: str) -> None:
        self.mc.submit(CancelRecord(tid))
        self.pool.discard(tid, reason)
        self.awaiting_cancel.append(tid)
        self.cancel_reason[tid] = reason

    def _ack(self, msg: bytes, d) -> None:
        track = self.tracks.get(msg)
        if track is not None and not track.aborted:
            track.acked = True

    def _sync_source(self) -> None:
        """Leader reads the target chain's verdicts and recorded receipts."""
        for tid, verdict in self.verdicts[self._verdict_cursor :]:
            if verdict == CONFLICT:
                self._cancel(tid, CONFLICT)
            elif verdict == APPLY:
                self.applied_unconfirmed.append(tid)
        self._verdict_cursor = len(self.verdicts)
        keep = []
        for tid in self.applied_unconfirmed:
            if self.sc.contains(tid):
                self.pool.mark_confirmed([tid])
            else:
                keep.append(tid)
        self.applied_unconfirmed = keep
        remove_stable(self.pool, self.sc)

    # -- target chain ------------------------------------------------------
    def _deliver_acp(self, msg: bytes, d) -> None:
        if d.timed_out:
            self._reject("stale")
            return
        key = hashlib.sha256(msg).digest()
        try:
            acp = Acp.from_bytes(msg)
        except InputError:
            self._reject("malformed")
            return
        if key in self.accepted_raw:
            self._send_ack(acp.digest)
            return
        ver = verification_time_ms(len(acp.txset))
        self.loop.after(ver, self._verified, acp, key, kind="verify")

    def _verified(self, acp: Acp, key: bytes) -> None:
        if key in self.accepted_raw:
            self._send_ack(acp.digest)
            return
        if any(self.mc.is_cancelled(tid) for tid in acp.txset.ids):
            self._reject("cancelled")
            return
        v = verify_acp(acp, self.roster, self.vk)
        if not v:
            self._reject(v.reason)
            return
        self.accepted_raw.add(key)
        track = self.tracks.get(acp.digest)
        if track is not None and track.accepted_at is None:
            track.accepted_at = self.loop.now
        self.checker.offer(acp.txset)
        self._target_progress()
        self._send_ack(acp.digest)

    def _reject(self, reason: str) -> None:
        self.rejections[reason] = self.rejections.get(reason, 0) + 1

    def _send_ack(self, digest: bytes) -> None:
        self._transmit(digest, "SC", "MC", self._ack)

    def _target_progress(self) -> None:
        if len(self.pool.records) > len(self.checker.order):
            view = export_sequence_view(
                self.pool, self.sc_cert, self.ca_pk, self.loop.now, start=len(self.checker.order)
            )
            self.checker.absorb(view)
        settled = self.checker.advance(self.mc.cancelled_ids)
        if not settled:
            return
        applied = []
        for item, verdict in settled:
            if verdict == APPLY:
                applied.append(BufferEntry(item, (), state=ORDERED))
                self.verdicts.append((item.id, APPLY))
            elif verdict == CONFLICT:
                self.verdicts.append((item.id, CONFLICT))
        if applied:
            confirm(applied, self.sc_committee)
            for e in applied:
                self.sc.submit(e.tx.as_recv())
                self.awaiting_recv.append(e.tx.id)


def run_asyncsc(s: Scenario, trace=None) -> RunArtifacts:
    return AsyncScRun(s, trace).run()
