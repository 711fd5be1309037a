"""System and public parameters for the delayed aggregate signature."""

from __future__ import annotations

import hashlib
import random
import secrets
from dataclasses import dataclass
from functools import lru_cache

import gmpy2

from ..errors import ParameterError

# security level -> RSA modulus bits for the delay group
MODULUS_BITS = {128: 2048, 192: 3072, 256: 4096}

SIG_GROUP = "BLS12-381"
SIG_SUITE = "BLS_SIG_BLS12381G2_XMD:SHA-256_SSWU_RO_POP_"
HASH_ID = "sha256"

DELAY_KINDS = ("wesolowski", "hashchain")


@dataclass(frozen=True)
class SysParams:
    security_bits: int
    modulus: int
    digest: bytes
    sig_group: str = SIG_GROUP
    sig_suite: str = SIG_SUITE
    hash_id: str = HASH_ID

    @property
    def element_size(self) -> int:
        return (self.modulus.bit_length() + 7) // 8


@dataclass(frozen=True)
class DelayKey:
    """Common shape of the evaluation and verification keys.

    ``setup_id`` binds a key pair to the ParGen call that produced it;
    ``system`` is the digest of the system parameters used for signing.
    """

    t: int
    modulus: int
    system: bytes
    setup_id: bytes
    kind: str = "wesolowski"

    @property
    def element_size(self) -> int:
        if self.kind == "hashchain":
            return 32
        return (self.modulus.bit_length() + 7) // 8

    @property
    def proof_size(self) -> int:
        return 0 if self.kind == "hashchain" else self.element_size

    def to_bytes(self) -> bytes:
        n = self.modulus.to_bytes((self.modulus.bit_length() + 7) // 8, "big")
        kind = DELAY_KINDS.index(self.kind)
        return (
            self.setup_id
            + self.system
            + self.t.to_bytes(8, "big")
            + bytes([kind])
            + len(n).to_bytes(2, "big")
            + n
        )

    @classmethod
    def from_bytes(cls, data: bytes):
        if len(data) < 75:
            raise ParameterError("truncated delay key")
        setup_id, system = data[:32], data[32:64]
        t = int.from_bytes(data[64:72], "big")
        kind = data[72]
        nlen = int.from_bytes(data[73:75], "big")
        if kind >= len(DELAY_KINDS) or len(data) != 75 + nlen:
            raise ParameterError("malformed delay key")
        modulus = int.from_bytes(data[75:], "big")
        return cls(t, modulus, system, setup_id, DELAY_KINDS[kind])


class EvaluationKey(DelayKey):
    pass


class VerificationKey(DelayKey):
    pass


@dataclass(frozen=True)
class PubParams:
    ek: EvaluationKey
    vk: VerificationKey

    @property
    def t(self) -> int:
        return self.ek.t


def _random_prime(rng: random.Random, bits: int) -> int:
    candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
    return int(gmpy2.next_prime(candidate))


@lru_cache(maxsize=16)
def _seeded_modulus(bits: int, seed) -> int:
    rng = random.Random(f"asyncsc/modulus/{bits}/{seed}")
    return _make_modulus(rng, bits)


def _make_modulus(rng, bits: int) -> int:
    while True:
        p = _random_prime(rng, bits // 2)
        q = _random_prime(rng, bits - bits // 2)
        n = p * q
        # factors go out of scope here; nobody keeps the group order
        if p != q and n.bit_length() == bits:
            return n


def par_gen(security_bits: int = 128, t: int = 1, *, seed=None, delay: str = "wesolowski"):
    """Generate ``(sp, pp)`` for security level ``security_bits`` and ``t`` delay steps.

    With ``seed`` the output is reproducible; otherwise the RSA modulus and the
    setup nonce come from the system CSPRNG. ``delay="hashchain"`` selects the
    non-succinct iterated-hash delay, meant only for quick tests.
    """
    if security_bits not in MODULUS_BITS:
        raise ParameterError(f"unsupported security level {security_bits!r}")
    if not isinstance(t, int) or t < 1:
        raise ParameterError(f"delay parameter t must be a positive integer, got {t!r}")
    if delay not in DELAY_KINDS:
        raise ParameterError(f"unknown delay kind {delay!r}")
    bits = MODULUS_BITS[security_bits]
    if seed is None:
        modulus = _make_modulus(random.Random(secrets.randbits(256)), bits)
        nonce = secrets.token_bytes(32)
    else:
        modulus = _seeded_modulus(bits, seed)
        nonce = hashlib.sha256(f"asyncsc/nonce/{seed}".encode()).digest()
    digest = hashlib.sha256(
        b"asyncsc/sp"
        + security_bits.to_bytes(2, "big")
        + modulus.to_bytes(bits // 8, "big")
        + nonce
    ).digest()
    sp = SysParams(security_bits, modulus, digest)
    return sp, pub_params(sp, t, delay=delay)


def pub_params(sp: SysParams, t: int, *, delay: str = "wesolowski") -> PubParams:
    """Derive ``(ek, vk)`` for another step count over existing system parameters."""
    if not isinstance(t, int) or t < 1:
        raise ParameterError(f"delay parameter t must be a positive integer, got {t!r}")
    setup_id = hashlib.sha256(
        b"asyncsc/pp" + sp.digest + t.to_bytes(8, "big") + delay.encode()
    ).digest()
    ek = EvaluationKey(t, sp.modulus, sp.digest, setup_id, delay)
    vk = VerificationKey(t, sp.modulus, sp.digest, setup_id, delay)
    return PubParams(ek, vk)
