"""Permissioned chain model: transactions, epoch sets, blocks and ledgers.

Chains are fork-free append-only logs with a fixed block interval. Runs of
empty blocks are not materialised: the ledger keeps the digest chain and the
tip, and stores only blocks that carry records.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

from .errors import InputError, TimingError, UnknownTransaction

SEND = "send"
RECV = "recv"
_DIRS = (SEND, RECV)

GENESIS_DIGEST = hashlib.sha256(b"asyncsc/genesis").digest()


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def _take(buf: bytes, off: int) -> tuple[bytes, int]:
    (n,) = struct.unpack_from(">I", buf, off)
    off += 4
    if off + n > len(buf):
        raise InputError("truncated field")
    return buf[off : off + n], off + n


@dataclass(frozen=True, slots=True)
class CrossTx:
    id: bytes
    epoch: int
    direction: str
    source: str
    target: str
    payload: bytes
    timestamp: float  # ms, simulation clock; kept at microsecond resolution
    weight: int = 0
    deps: tuple = ()

    def to_bytes(self) -> bytes:
        head = struct.pack(
            ">16sIBqI",
            self.id,
            self.epoch,
            _DIRS.index(self.direction),
            round(self.timestamp * 1000),
            self.weight,
        )
        deps = struct.pack(">H", len(self.deps)) + b"".join(self.deps)
        return (
            head
            + _lp(self.source.encode())
            + _lp(self.target.encode())
            + _lp(self.payload)
            + deps
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "CrossTx":
        try:
            tid, epoch, d, ts, weight = struct.unpack_from(">16sIBqI", data, 0)
            off = struct.calcsize(">16sIBqI")
            src, off = _take(data, off)
            dst, off = _take(data, off)
            payload, off = _take(data, off)
            (ndeps,) = struct.unpack_from(">H", data, off)
            off += 2
            deps = tuple(data[off + 16 * i : off + 16 * (i + 1)] for i in range(ndeps))
            off += 16 * ndeps
            if off != len(data) or d >= len(_DIRS):
                raise InputError("malformed transaction encoding")
        except struct.error as exc:
            raise InputError("truncated transaction encoding") from exc
        return cls(tid, epoch, _DIRS[d], src.decode(), dst.decode(), payload, ts / 1000, weight, deps)

    def as_recv(self) -> "CrossTx":
        """Receiving half: same id, direction flipped."""
        return CrossTx(
            self.id, self.epoch, RECV, self.source, self.target,
            self.payload, self.timestamp, self.weight, self.deps,
        )


@dataclass(frozen=True)
class CrossTxSet:
    epoch: int
    txs: tuple
    digest: bytes = field(default=b"", compare=False)
    _raw: bytes = field(default=b"", repr=False, compare=False)

    def __post_init__(self):
        if not self.txs:
            raise InputError("a CrossTxSet cannot be empty")
        if any(tx.epoch != self.epoch for tx in self.txs):
            raise InputError("set members must share the epoch index")
        raw = struct.pack(">II", self.epoch, len(self.txs)) + b"".join(
            _lp(tx.to_bytes()) for tx in self.txs
        )
        object.__setattr__(self, "_raw", raw)
        object.__setattr__(self, "digest", hashlib.sha256(b"asyncsc/ctxset" + raw).digest())

    def __len__(self) -> int:
        return len(self.txs)

    def to_bytes(self) -> bytes:
        return self._raw

    @classmethod
    def from_bytes(cls, data: bytes) -> "CrossTxSet":
        if len(data) < 8:
            raise InputError("truncated CrossTxSet")
        epoch, n = struct.unpack_from(">II", data, 0)
        off = 8
        txs = []
        for _ in range(n):
            raw, off = _take(data, off)
            txs.append(CrossTx.from_bytes(raw))
        if off != len(data):
            raise InputError("trailing bytes after CrossTxSet")
        return cls(epoch, tuple(txs))

    @property
    def ids(self) -> list[bytes]:
        return [tx.id for tx in self.txs]


def pack_epoch(pending, epoch: int) -> CrossTxSet | None:
    """Order pending transactions by (timestamp, id); ``None`` for an empty epoch."""
    pending = list(pending)
    if not pending:
        return None
    if any(tx.epoch != epoch for tx in pending):
        raise InputError(f"pending transactions outside epoch {epoch}")
    return CrossTxSet(epoch, tuple(sorted(pending, key=lambda tx: (tx.timestamp, tx.id))))


@dataclass(frozen=True)
class CancelRecord:
    """Compensating record voiding an earlier send."""

    id: bytes

    def to_bytes(self) -> bytes:
        return b"CANCEL" + self.id


@dataclass(frozen=True)
class Block:
    height: int
    prev: bytes
    records: tuple
    time: float
    digest: bytes = field(default=b"", compare=False)

    @staticmethod
    def merkle_leaf(record) -> bytes:
        return hashlib.sha256(b"\x00" + record.to_bytes()).digest()

    def leaves(self) -> list[bytes]:
        return [self.merkle_leaf(r) for r in self.records]


def merkle_root(leaves: list[bytes]) -> bytes:
    if not leaves:
        return hashlib.sha256(b"asyncsc/empty").digest()
    level = list(leaves)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [
            hashlib.sha256(b"\x01" + level[i] + level[i + 1]).digest()
            for i in range(0, len(level), 2)
        ]
    return level[0]


def block_digest(height: int, prev: bytes, time: float, root: bytes) -> bytes:
    return hashlib.sha256(
        struct.pack(">Qq", height, round(time * 1000)) + prev + root
    ).digest()


_EMPTY_ROOT = merkle_root([])


class Ledger:
    """Append-only chain with ``k``-confirmation stability."""

    def __init__(self, name: str = "chain", k: int = 5, interval: float = 100.0):
        if k < 0 or interval <= 0:
            raise InputError("k must be >= 0 and the block interval positive")
        self.name = name
        self.k = k
        self.interval = float(interval)
        genesis = Block(0, b"\x00" * 32, (), 0.0, GENESIS_DIGEST)
        self._blocks = {0: genesis}
        self.tip_height = 0
        self.tip_time = 0.0
        self.tip_digest = GENESIS_DIGEST
        self._where: dict[bytes, int] = {}
        self._cancelled: dict[bytes, int] = {}
        self._pending: list = []

    # -- writing -------------------------------------------------------
    def append_block(self, records, now: float) -> Block:
        due = self.tip_time + self.interval
        if now < due - 1e-9:
            raise TimingError(f"{self.name}: block due at {due} ms, asked at {now} ms")
        records = tuple(records)
        height = self.tip_height + 1
        root = merkle_root([Block.merkle_leaf(r) for r in records]) if records else _EMPTY_ROOT
        digest = block_digest(height, self.tip_digest, now, root)
        block = Block(height, self.tip_digest, records, now, digest)
        for r in records:
            if isinstance(r, CancelRecord):
                self._cancelled[r.id] = height
            else:
                self._where[r.id] = height
        if records:
            self._blocks[height] = block
        self.tip_height, self.tip_time, self.tip_digest = height, now, digest
        return block

    def submit(self, record) -> None:
        """Queue a record for the next block boundary."""
        self._pending.append(record)

    def advance_to(self, now: float) -> int:
        """Produce every block due at or before ``now``; return how many."""
        made = 0
        while self.tip_time + self.interval <= now + 1e-9:
            records, self._pending = self._pending, []
            self.append_block(records, self.tip_time + self.interval)
            made += 1
        return made

    def next_block_time(self, now: float) -> float:
        """Time of the first block not yet produced that is due at or after ``now``."""
        slot = math.ceil(now / self.interval - 1e-9) * self.interval
        return max(slot, self.tip_time + self.interval)

    # -- reading -------------------------------------------------------
    @property
    def blocks(self) -> list[Block]:
        """Stored (non-empty) blocks plus genesis, by height."""
        return [self._blocks[h] for h in sorted(self._blocks)]

    def height_of(self, tx_id: bytes) -> int:
        try:
            return self._where[tx_id]
        except KeyError:
            raise UnknownTransaction(tx_id.hex()) from None

    def time_of(self, tx_id: bytes) -> float:
        return self.height_of(tx_id) * self.interval

    def block_at(self, height: int) -> Block:
        return self._blocks[height]

    def contains(self, tx_id: bytes) -> bool:
        return tx_id in self._where

    def is_cancelled(self, tx_id: bytes) -> bool:
        return tx_id in self._cancelled

    def cancel_height(self, tx_id: bytes) -> int | None:
        return self._cancelled.get(tx_id)

    def is_effective(self, tx_id: bytes) -> bool:
        return tx_id in self._where and tx_id not in self._cancelled

    def is_stable(self, tx_id: bytes) -> bool:
        return self.tip_height - self.height_of(tx_id) >= self.k

    def stable_time(self, tx_id: bytes) -> float:
        """Time of the block that makes ``tx_id`` stable."""
        return (self.height_of(tx_id) + self.k) * self.interval

    def position(self, tx_id: bytes) -> tuple[int, int]:
        h = self.height_of(tx_id)
        for i, r in enumerate(self._blocks[h].records):
            if r.id == tx_id and not isinstance(r, CancelRecord):
                return h, i
        raise UnknownTransaction(tx_id.hex())

    def recorded_ids(self):
        return self._where.keys()

    @property
    def cancelled_ids(self):
        return self._cancelled.keys()

    def ordered_ids(self) -> list[bytes]:
        """Non-cancel record ids in ledger order."""
        out = []
        for h in sorted(self._blocks):
            out.extend(r.id for r in self._blocks[h].records if not isinstance(r, CancelRecord))
        return out

    def dump(self, fh) -> None:
        """CSV: height,time_ms,ids (space separated; cancels prefixed ``x``)."""
        fh.write("height,time_ms,tx_ids\n")
        for b in self.blocks[1:]:
            ids = " ".join(
                ("x" + r.id.hex()) if isinstance(r, CancelRecord) else r.id.hex()
                for r in b.records
            )
            fh.write(f"{b.height},{b.time:.3f},{ids}\n")


@dataclass
class EpochClock:
    duration: float = 600.0

    def epoch_of(self, now: float) -> int:
        return int(math.floor(now / self.duration + 1e-9))

    def start_of(self, epoch: int) -> float:
        return epoch * self.duration

    def end_of(self, epoch: int) -> float:
        return (epoch + 1) * self.duration


def measure_timing(ledger: Ledger, txset: CrossTxSet, clock: EpochClock) -> tuple[float, float]:
    """Return ``(T_stab, T_last)`` in ms for a set recorded on ``ledger``."""
    last = max(ledger.time_of(tx.id) for tx in txset.txs)
    return ledger.k * ledger.interval, clock.end_of(txset.epoch) - last


def ideal_delay(t_stab: float, t_last: float, t_sig: float) -> float:
    return t_stab - t_last - t_sig
