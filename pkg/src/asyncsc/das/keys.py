"""Same-message BLS multi-signatures with proof-of-possession.

Pairing arithmetic comes from blspy (IETF POP ciphersuite). Every signed
message is prefixed with the system-parameter digest so signatures made under
one setup never verify under another.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field

from blspy import G1Element, G2Element, PopSchemeMPL, PrivateKey

from ..errors import InputError
from .params import SysParams

PK_SIZE = 48
SIG_SIZE = 96


@dataclass(frozen=True)
class PublicKey:
    data: bytes
    domain: bytes = field(repr=False)

    def point(self) -> G1Element:
        return G1Element.from_bytes(self.data)

    def to_bytes(self) -> bytes:
        return self.data


@dataclass(frozen=True)
class SecretKey:
    data: bytes = field(repr=False)
    domain: bytes = field(repr=False)


@dataclass(frozen=True)
class KeyPair:
    pk: PublicKey
    sk: SecretKey
    pop: bytes = field(repr=False)


@dataclass(frozen=True)
class PartialSig:
    signer: PublicKey
    sigma: bytes

    def to_bytes(self) -> bytes:
        return self.signer.data + self.sigma


@dataclass(frozen=True)
class AggPubKey:
    data: bytes
    domain: bytes = field(repr=False)

    def to_bytes(self) -> bytes:
        return self.data


def _domain_message(domain: bytes, message: bytes) -> bytes:
    return domain + message


def key_gen(sp: SysParams, rng=None) -> KeyPair:
    """Fresh key pair; pass a ``random.Random`` for reproducible keys."""
    if not isinstance(sp, SysParams):
        raise InputError("key_gen needs SysParams")
    seed = rng.randbytes(32) if rng is not None else secrets.token_bytes(32)
    sk = PopSchemeMPL.key_gen(seed)
    pk = PublicKey(bytes(sk.get_g1()), sp.digest)
    pop = bytes(PopSchemeMPL.pop_prove(sk))
    return KeyPair(pk, SecretKey(bytes(sk), sp.digest), pop)


def pop_verify(pk: PublicKey, pop: bytes) -> bool:
    try:
        return PopSchemeMPL.pop_verify(pk.point(), G2Element.from_bytes(pop))
    except (ValueError, RuntimeError):
        return False


def sign(sk: SecretKey, message: bytes) -> PartialSig:
    if not message:
        raise InputError("refusing to sign an empty message")
    key = PrivateKey.from_bytes(sk.data)
    sig = PopSchemeMPL.sign(key, _domain_message(sk.domain, message))
    return PartialSig(PublicKey(bytes(key.get_g1()), sk.domain), bytes(sig))


def verify(message: bytes, pk: PublicKey, sig: PartialSig | bytes) -> bool:
    sigma = sig.sigma if isinstance(sig, PartialSig) else sig
    try:
        return PopSchemeMPL.verify(
            pk.point(), _domain_message(pk.domain, message), G2Element.from_bytes(sigma)
        )
    except (ValueError, RuntimeError):
        return False


def key_agg(pks) -> AggPubKey:
    pks = list(pks)
    if not pks:
        raise InputError("cannot aggregate an empty key set")
    domains = {pk.domain for pk in pks}
    if len(domains) != 1:
        raise InputError("public keys come from different system parameters")
    if len({pk.data for pk in pks}) != len(pks):
        raise InputError("duplicate public key in aggregation set")
    # group addition commutes, so the sum is order independent
    total = G1Element()
    for pk in pks:
        total += pk.point()
    return AggPubKey(bytes(total), domains.pop())


def ak_check(pks, apk: AggPubKey) -> bool:
    try:
        expect = key_agg(pks)
    except (InputError, ValueError, RuntimeError):
        return False
    return expect.data == apk.data and expect.domain == apk.domain


def aggregate_sigs(sigs) -> bytes:
    return bytes(PopSchemeMPL.aggregate([G2Element.from_bytes(s.sigma) for s in sigs]))


def verify_aggregate(message: bytes, apk: AggPubKey, sigma: bytes) -> bool:
    try:
        point = G1Element.from_bytes(apk.data)
        return PopSchemeMPL.verify(
            point, _domain_message(apk.domain, message), G2Element.from_bytes(sigma)
        )
    except (ValueError, RuntimeError):
        return False
