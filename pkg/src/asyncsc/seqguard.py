"""Transaction sequence guarantee.

The source chain keeps a multilevel buffer pool that fixes a global order for
cross-chain transactions and exports it, signed, to authenticated peer
leaders. The target chain checks each arriving batch against that order and
only applies transactions whose predecessors are settled.
"""

from __future__ import annotations

import hashlib
import heapq
import struct
from dataclasses import dataclass, field

from .chain import CrossTx, CrossTxSet, Ledger
from .committee import quorum
from .das import KeyPair, PublicKey, sign, verify
from .das.keys import SIG_SIZE
from .errors import (
    AuthorizationError,
    Backpressure,
    ConfigurationError,
    ConfirmationError,
    InputError,
)

RECEIVED = "received"
ORDERED = "ordered"
PROCESSING = "processing"
CONFIRMED = "confirmed"
REMOVED = "removed"
_NEXT = {RECEIVED: ORDERED, ORDERED: PROCESSING, PROCESSING: CONFIRMED, CONFIRMED: REMOVED}

APPLY = "apply"
HOLD = "hold"
CONFLICT = "conflict"
ABORTED = "aborted"

POLICIES = ("timestamp", "importance", "dependency")


@dataclass(slots=True)
class BufferEntry:
    tx: CrossTx
    key: tuple
    level: int = 0
    state: str = RECEIVED
    position: int = -1
    outcome: str | None = None  # set when the entry leaves the pool

    def advance(self, state: str) -> None:
        if state == REMOVED and self.state != REMOVED:
            self.state = REMOVED
            return
        if _NEXT.get(self.state) != state:
            raise InputError(f"illegal transition {self.state} -> {state}")
        self.state = state


def priority_key(tx: CrossTx, policy: str, depth: int = 0) -> tuple:
    if policy == "timestamp":
        return (tx.timestamp, tx.id)
    if policy == "importance":
        return (-tx.weight, tx.timestamp, tx.id)
    return (depth, -tx.weight, tx.timestamp, tx.id)


class BufferPool:
    """Priority pool with a sliding ordering window.

    ``capacity`` bounds entries still waiting to be ordered. Under the
    dependency policy an entry becomes eligible only once all of its
    dependencies hold a position, and its level is its dependency depth.
    """

    def __init__(
        self,
        capacity: int = 2000,
        window: int = 400,
        policy: str = "dependency",
        window_min: int = 300,
        window_max: int | None = None,
        owner: KeyPair | None = None,
        high_water: float = 0.8,
        low_water: float = 0.2,
    ):
        if policy not in POLICIES:
            raise ConfigurationError(f"unknown priority policy {policy!r}")
        if capacity < 1 or window < 1:
            raise ConfigurationError("capacity and window must be positive")
        self.capacity = capacity
        self.policy = policy
        self.window = window
        self.window_min = min(window_min, window)
        self.window_max = max(window_max or capacity, window)
        self.high = high_water * capacity
        self.low = low_water * capacity
        self.owner = owner
        self.entries: dict[bytes, BufferEntry] = {}
        self._heaps: dict[int, list] = {}
        self._waiting: dict[bytes, list[BufferEntry]] = {}
        self._missing: dict[bytes, int] = {}
        self._depth: dict[bytes, int] = {}
        self.unordered = 0
        self.records: list[tuple[bytes, int, int]] = []  # (id, epoch, position)
        self.received_total = 0
        self.left = {REMOVED: 0, CONFLICT: 0, ABORTED: 0}

    @property
    def free(self) -> int:
        return self.capacity - self.unordered

    def __len__(self) -> int:
        return len(self.entries)

    def _push(self, entry: BufferEntry) -> None:
        heapq.heappush(self._heaps.setdefault(entry.level, []), (entry.key, entry))

    def enqueue(self, txset: CrossTxSet) -> None:
        if len(txset) > self.free:
            raise Backpressure(self.free, len(txset) - self.free)
        for tx in txset.txs:
            if tx.id in self.entries or tx.id in self._depth:
                raise InputError(f"transaction {tx.id.hex()} enqueued twice")
            entry = BufferEntry(tx, ())
            self.entries[tx.id] = entry
            self.unordered += 1
            self.received_total += 1
            if self.policy != "dependency":
                entry.key = priority_key(tx, self.policy)
                self._push(entry)
                continue
            missing = [d for d in tx.deps if d not in self._depth]
            if missing:
                self._missing[tx.id] = len(missing)
                for d in missing:
                    self._waiting.setdefault(d, []).append(entry)
            else:
                self._make_eligible(entry)

    def _make_eligible(self, entry: BufferEntry) -> None:
        tx = entry.tx
        entry.level = 1 + max((self._depth[d] for d in tx.deps), default=-1)
        entry.key = priority_key(tx, self.policy, entry.level)
        self._push(entry)

    def _pop(self) -> BufferEntry | None:
        for level in sorted(self._heaps):
            heap = self._heaps[level]
            if heap:
                return heapq.heappop(heap)[1]
        return None

    def order_window(self, traffic: float | None = None) -> list[BufferEntry]:
        """Position up to ``window`` eligible entries, then adapt the window.

        ``traffic`` defaults to the number of entries still unordered.
        """
        out = []
        while len(out) < self.window:
            entry = self._pop()
            if entry is None:
                break
            entry.advance(ORDERED)
            entry.position = len(self.records)
            self.records.append((entry.tx.id, entry.tx.epoch, entry.position))
            self.unordered -= 1
            self._depth[entry.tx.id] = entry.level
            for waiter in self._waiting.pop(entry.tx.id, ()):
                self._missing[waiter.tx.id] -= 1
                if not self._missing[waiter.tx.id]:
                    del self._missing[waiter.tx.id]
                    self._make_eligible(waiter)
            out.append(entry)
        load = self.unordered if traffic is None else traffic
        if load > self.high:
            self.window = min(self.window_max, int(self.window * 1.25))
        elif load < self.low:
            self.window = max(self.window_min, int(self.window * 0.75))
        return out

    def mark_processing(self, ids) -> None:
        for tid in ids:
            e = self.entries.get(tid)
            if e is not None and e.state == ORDERED:
                e.advance(PROCESSING)

    def mark_confirmed(self, ids) -> None:
        for tid in ids:
            e = self.entries.get(tid)
            if e is not None and e.state == PROCESSING:
                e.advance(CONFIRMED)

    def discard(self, tid: bytes, outcome: str) -> bool:
        """Drop an entry that will never be executed (conflict or abort)."""
        e = self.entries.pop(tid, None)
        if e is None:
            return False
        if e.state == RECEIVED:
            # never ordered: pull it out of the heaps lazily via a fresh heap
            self.unordered -= 1
            self._heaps = {
                lvl: [item for item in h if item[1] is not e] for lvl, h in self._heaps.items()
            }
            for h in self._heaps.values():
                heapq.heapify(h)
        e.state = REMOVED
        e.outcome = outcome
        self.left[outcome] += 1
        return True

    def dump(self, fh) -> None:
        fh.write("id,level,state,priority_key\n")
        for tid, e in self.entries.items():
            key = " ".join(k.hex() if isinstance(k, bytes) else repr(k) for k in e.key)
            fh.write(f"{tid.hex()},{e.level},{e.state},{key}\n")


def remove_stable(pool: BufferPool, ledger: Ledger) -> list[bytes]:
    """Purge entries whose receiving transaction is stable on ``ledger``."""
    purged = []
    for tid, e in list(pool.entries.items()):
        if e.state in (RECEIVED, ORDERED):
            continue
        if ledger.contains(tid) and ledger.is_stable(tid):
            del pool.entries[tid]
            e.state = REMOVED
            e.outcome = REMOVED
            pool.left[REMOVED] += 1
            purged.append(tid)
    return purged


# -- restricted readability ------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    holder: str
    issuer: str
    pk: PublicKey
    valid_from: float
    valid_until: float
    signature: bytes = b""

    def body(self) -> bytes:
        return (
            b"asyncsc/cert"
            + struct.pack(">H", len(self.holder)) + self.holder.encode()
            + struct.pack(">H", len(self.issuer)) + self.issuer.encode()
            + self.pk.data
            + struct.pack(">qq", round(self.valid_from * 1000), round(self.valid_until * 1000))
        )


class CertificateAuthority:
    def __init__(self, name: str, keys: KeyPair):
        self.name = name
        self.keys = keys

    @property
    def pk(self) -> PublicKey:
        return self.keys.pk

    def issue(self, holder: str, pk: PublicKey, valid_from: float, valid_until: float) -> Certificate:
        cert = Certificate(holder, self.name, pk, valid_from, valid_until)
        sig = sign(self.keys.sk, cert.body()).sigma
        return Certificate(holder, self.name, pk, valid_from, valid_until, sig)


def check_certificate(cert: Certificate, ca_pk: PublicKey, now: float) -> None:
    if not cert.signature or not verify(cert.body(), ca_pk, cert.signature):
        raise AuthorizationError(f"certificate of {cert.holder} not issued by the trusted CA")
    if not cert.valid_from <= now <= cert.valid_until:
        raise AuthorizationError(f"certificate of {cert.holder} outside its validity period")


_REC = struct.Struct(">16sII")


@dataclass(frozen=True)
class SequenceView:
    records: tuple  # (id, epoch, position)
    signature: bytes

    def body(self) -> bytes:
        recs = b"".join(_REC.pack(*r) for r in self.records)
        return struct.pack(">I", len(recs)) + recs

    def to_bytes(self) -> bytes:
        return self.body() + self.signature

    @classmethod
    def from_bytes(cls, data: bytes) -> "SequenceView":
        if len(data) < 4:
            raise InputError("truncated sequence view")
        (n,) = struct.unpack_from(">I", data, 0)
        if n % _REC.size or len(data) != 4 + n + SIG_SIZE:
            raise InputError("malformed sequence view")
        recs = tuple(_REC.unpack_from(data, 4 + i) for i in range(0, n, _REC.size))
        return cls(recs, data[4 + n :])

    @staticmethod
    def unsigned_body(records) -> bytes:
        return SequenceView(tuple(records), b"").body()


def verify_view(view: SequenceView, leader_pk: PublicKey) -> None:
    if not view.signature or not verify(view.body(), leader_pk, view.signature):
        raise AuthorizationError("sequence view signature invalid")
    positions = [r[2] for r in view.records]
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise AuthorizationError("sequence view positions not increasing")


def export_sequence_view(
    pool: BufferPool, requester: Certificate, ca_pk: PublicKey, now: float = 0.0, start: int = 0
) -> SequenceView:
    """Signed snapshot of ids and positions from ``start`` on; no payloads."""
    check_certificate(requester, ca_pk, now)
    if pool.owner is None:
        raise ConfigurationError("pool has no signing leader")
    records = tuple(pool.records[start:])
    sig = sign(pool.owner.sk, SequenceView.unsigned_body(records)).sigma
    return SequenceView(records, sig)


# -- target side -----------------------------------------------------------


class SequenceChecker:
    """Walks the source order and settles each transaction exactly once.

    A transaction is applied when its batch has been accepted and every
    earlier position is settled; it conflicts when a dependency was not
    applied or is not positioned before it. A missing batch holds the walk.
    """

    def __init__(self, leader_pk: PublicKey):
        self.leader_pk = leader_pk
        self.order: list[bytes] = []
        self.pos: dict[bytes, int] = {}
        self.cursor = 0
        self.available: dict[bytes, CrossTx] = {}
        self.outcome: dict[bytes, str] = {}
        self.seen_sets: set[bytes] = set()

    def absorb(self, view: SequenceView) -> int:
        verify_view(view, self.leader_pk)
        added = 0
        for tid, _epoch, position in view.records:
            if position < len(self.order):
                continue
            if position != len(self.order):
                raise AuthorizationError("gap in sequence view")
            self.pos[tid] = position
            self.order.append(tid)
            added += 1
        return added

    def offer(self, txset: CrossTxSet) -> bool:
        """Make a batch available; ``False`` for a duplicate."""
        if txset.digest in self.seen_sets:
            return False
        self.seen_sets.add(txset.digest)
        for tx in txset.txs:
            self.available.setdefault(tx.id, tx)
        return True

    def verdict(self, tx: CrossTx) -> str:
        me = self.pos[tx.id]
        for d in tx.deps:
            p = self.pos.get(d)
            if p is None or p > me or self.outcome.get(d) != APPLY:
                return CONFLICT
        return APPLY

    def advance(self, cancelled=frozenset()) -> list[tuple[CrossTx | bytes, str]]:
        settled = []
        while self.cursor < len(self.order):
            tid = self.order[self.cursor]
            if tid in cancelled and tid not in self.outcome:
                self.outcome[tid] = ABORTED
                settled.append((tid, ABORTED))
            elif tid not in self.outcome:
                tx = self.available.get(tid)
                if tx is None:
                    break
                v = self.verdict(tx)
                self.outcome[tid] = v
                settled.append((tx, v))
            self.cursor += 1
        return settled

    @property
    def blocked_on(self) -> bytes | None:
        return self.order[self.cursor] if self.cursor < len(self.order) else None


def conflict_check(
    view: SequenceView, arriving: CrossTxSet, applied, leader_pk: PublicKey, aborted=()
) -> dict[bytes, str]:
    """Verdict for every member of ``arriving`` given settled history.

    ``applied`` and ``aborted`` list already settled ids; everything else in
    the view is unsettled.
    """
    verify_view(view, leader_pk)
    applied, aborted = set(applied), set(aborted)
    pos = {r[0]: r[2] for r in view.records}
    ordered = sorted(view.records, key=lambda r: r[2])
    members = {tx.id: tx for tx in arriving.txs}
    settled = {tid: APPLY for tid in applied}
    settled.update({tid: ABORTED for tid in aborted})
    out = {tid: HOLD for tid in members}
    for tid, _epoch, p in ordered:
        if tid in settled and tid not in members:
            continue
        if tid not in members:
            break  # an unsettled predecessor outside this batch
        tx = members[tid]
        bad = any(
            pos.get(d) is None or pos[d] > p or settled.get(d) != APPLY for d in tx.deps
        )
        out[tid] = CONFLICT if bad else APPLY
        settled[tid] = out[tid]
    # members aborted-dependent but not yet positioned still conflict
    for tid, tx in members.items():
        if out[tid] == HOLD and any(d in aborted for d in tx.deps):
            out[tid] = CONFLICT
    return out


def confirm(entries, committee, attesting=None) -> list:
    """Quorum attestation over the order digest of ``entries``."""
    entries = list(entries)
    m = len(committee)
    votes = m if attesting is None else len(set(attesting) & {n.id for n in committee})
    for e in entries:
        if e.state == ORDERED:
            e.advance(PROCESSING)
    if votes < quorum(m):
        raise ConfirmationError(f"{votes} of {m} attestations, need {quorum(m)}")
    for e in entries:
        e.advance(CONFIRMED)
    return entries


def order_digest(ids) -> bytes:
    h = hashlib.sha256(b"asyncsc/order")
    for tid in ids:
        h.update(tid)
    return h.digest()
