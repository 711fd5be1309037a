"""Delayed aggregation and its verification."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..errors import AggregationError, InputError, ParameterError
from . import delay
from .keys import SIG_SIZE, AggPubKey, aggregate_sigs, key_agg, verify, verify_aggregate
from .params import DelayKey

BAD_AGGREGATE = "bad-aggregate"
BAD_DELAY = "bad-delay"


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


ACCEPT = Verdict(True)


@dataclass(frozen=True)
class DasCommitment:
    sigma: bytes
    proof: bytes
    output: bytes

    def to_bytes(self) -> bytes:
        """sigma (96) || proof (modulus width, empty for hashchain) || output."""
        return self.sigma + self.proof + self.output

    @classmethod
    def from_bytes(cls, data: bytes, key: DelayKey) -> "DasCommitment":
        expect = SIG_SIZE + key.proof_size + key.element_size
        if len(data) != expect:
            raise ParameterError(f"commitment must be {expect} bytes, got {len(data)}")
        p = SIG_SIZE + key.proof_size
        return cls(data[:SIG_SIZE], data[SIG_SIZE:p], data[p:])


def delay_input(message: bytes, apk: AggPubKey, sigma: bytes) -> bytes:
    """Bind the delay to the message and to the finished aggregate."""
    return hashlib.sha256(
        b"asyncsc/das-bind"
        + len(message).to_bytes(8, "big")
        + message
        + apk.data
        + sigma
    ).digest()


def da_sign(message: bytes, pks, sigs, ek: DelayKey) -> DasCommitment:
    """Aggregate ``sigs`` over ``message`` then run the sequential delay.

    Every pair is re-verified first; the first bad one raises
    :class:`AggregationError` carrying the offending key.
    """
    pks = list(pks)
    sigs = list(sigs)
    if not sigs:
        raise InputError("no signatures to aggregate")
    signers = [s.signer for s in sigs]
    if len(set(signers)) != len(signers):
        raise InputError("duplicate signer in signature list")
    if set(signers) != set(pks):
        raise InputError("public key set does not match the signers")
    if any(pk.domain != ek.system for pk in pks):
        raise InputError("keys and evaluation key come from different setups")
    for s in sigs:
        if not verify(message, s.signer, s):
            raise AggregationError(s.signer)
    apk = key_agg(pks)
    sigma = aggregate_sigs(sigs)
    output, proof = delay.evaluate(ek, delay_input(message, apk, sigma))
    return DasCommitment(sigma, proof, output)


def das_verify(message: bytes, apk: AggPubKey, c: DasCommitment, vk: DelayKey) -> Verdict:
    if apk.domain != vk.system or not verify_aggregate(message, apk, c.sigma):
        return Verdict(False, BAD_AGGREGATE)
    if not delay.verify(vk, delay_input(message, apk, c.sigma), c.output, c.proof):
        return Verdict(False, BAD_DELAY)
    return ACCEPT
