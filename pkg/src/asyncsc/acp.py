"""Asynchronous cross-chain proofs: build, verify, complete, retransmit."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .chain import CrossTx, CrossTxSet, Ledger
from .committee import bitmap_members, roster_bitmap
from .das import (
    AggPubKey,
    DasCommitment,
    Verdict,
    VerificationKey,
    ak_check,
    da_sign,
    das_verify,
    key_agg,
)
from .das.scheme import ACCEPT
from .errors import CommitteeIntegrityError, InputError, ParameterError
from .seqguard import APPLY, SequenceChecker

UNKNOWN_SIGNERS = "unknown-signers"
DIGEST_MISMATCH = "digest-mismatch"
UNKNOWN_SETUP = "unknown-setup"


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


@dataclass(frozen=True)
class Acp:
    vk: VerificationKey
    txset: CrossTxSet
    digest: bytes  # the signed message: digest of txset as built
    bitmap: bytes
    apk: AggPubKey
    commitment: DasCommitment

    def to_bytes(self) -> bytes:
        return b"".join(
            _lp(x)
            for x in (
                self.vk.to_bytes(),
                self.txset.to_bytes(),
                self.digest,
                self.bitmap,
                self.apk.data,
                self.commitment.to_bytes(),
            )
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Acp":
        parts, off = [], 0
        try:
            for _ in range(6):
                (n,) = struct.unpack_from(">I", data, off)
                off += 4
                if off + n > len(data):
                    raise InputError("truncated ACP section")
                parts.append(data[off : off + n])
                off += n
        except struct.error as exc:
            raise InputError("truncated ACP") from exc
        if off != len(data):
            raise InputError("trailing bytes after ACP")
        try:
            vk = VerificationKey.from_bytes(parts[0])
            c = DasCommitment.from_bytes(parts[5], vk)
        except ParameterError as exc:
            raise InputError(str(exc)) from exc
        txset = CrossTxSet.from_bytes(parts[1])
        return cls(vk, txset, parts[2], parts[3], AggPubKey(parts[4], vk.system), c)

    @property
    def epoch(self) -> int:
        return self.txset.epoch


def build_acp(txset: CrossTxSet, sigs, ek, vk, roster, apk: AggPubKey | None = None) -> Acp:
    """Leader side: aggregate keys, check them, then delay-aggregate.

    ``apk`` may be supplied by the caller (normally the leader's own
    aggregation); it is checked against the actual signer keys before any
    delay work starts.
    """
    sigs = [s for _, s in sigs] if sigs and isinstance(sigs[0], tuple) else list(sigs)
    if not sigs:
        raise InputError("no signatures")
    pks = [s.signer for s in sigs]
    if apk is None:
        apk = key_agg(pks)
    if not ak_check(pks, apk):
        raise CommitteeIntegrityError("aggregate key does not match the signer set")
    commitment = da_sign(txset.digest, pks, sigs, ek)
    return Acp(vk, txset, txset.digest, roster_bitmap(roster, pks), apk, commitment)


def verify_acp(acp: Acp, roster, trusted_vk: VerificationKey | None = None) -> Verdict:
    """Target side check; ``roster`` is the source committee's key list."""
    if trusted_vk is not None and acp.vk != trusted_vk:
        return Verdict(False, UNKNOWN_SETUP)
    if acp.txset.digest != acp.digest:
        return Verdict(False, DIGEST_MISMATCH)
    members = bitmap_members(roster, acp.bitmap)
    if not members or not ak_check(members, acp.apk):
        return Verdict(False, UNKNOWN_SIGNERS)
    v = das_verify(acp.digest, acp.apk, acp.commitment, acp.vk)
    return v if not v else ACCEPT


# -- lifecycle -----------------------------------------------------------

STATES = (
    "initiated",
    "packed",
    "signed",
    "acp-built",
    "acp-sent",
    "acp-verified",
    "seq-checked",
    "recorded",
    "stable",
)
ABORTED = "aborted"

NONE = "none"
RETRANSMIT = "retransmit"
ABORT = "abort"


@dataclass
class CtxLifecycle:
    state: str = "initiated"
    retransmissions: int = 0
    max_retransmissions: int = 3
    times: dict = field(default_factory=dict)
    sent_at: float = 0.0

    def advance(self, state: str, now: float) -> None:
        if state == ABORTED:
            if self.state in ("stable", ABORTED):
                raise InputError(f"cannot abort from {self.state}")
        elif self.state == ABORTED or STATES.index(state) != STATES.index(self.state) + 1:
            raise InputError(f"illegal transition {self.state} -> {state}")
        self.state = state
        self.times[state] = now
        if state == "acp-sent":
            self.sent_at = now

    def retransmitted(self, now: float) -> None:
        if self.retransmissions >= self.max_retransmissions:
            raise InputError("retransmission budget exhausted")
        self.retransmissions += 1
        self.sent_at = now


def handle_timeout(lc: CtxLifecycle, now: float, delta_async: float) -> str:
    if lc.state != "acp-sent" or now - lc.sent_at <= delta_async:
        return NONE
    if lc.retransmissions < lc.max_retransmissions:
        return RETRANSMIT
    return ABORT


def complete_ctxs(acp: Acp, target: Ledger, checker: SequenceChecker, cancelled=frozenset()) -> list[CrossTx]:
    """Queue receiving transactions that the sequence check now allows.

    Returns the receiving transactions submitted to ``target`` by this call;
    members with unsettled predecessors stay held inside ``checker``.
    A repeated delivery of the same batch submits nothing new of its own.
    """
    checker.offer(acp.txset)
    out = []
    for tx, verdict in checker.advance(cancelled):
        if verdict == APPLY:
            recv = tx.as_recv()
            target.submit(recv)
            out.append(recv)
    return out
