"""Sequential delay function with a succinct proof of correct evaluation.

The succinct variant squares a hashed group element ``t`` times in an RSA
group whose factorisation was discarded at setup, then attaches a
Wesolowski proof ``pi = g^(2^t // l)`` for a Fiat-Shamir prime ``l``.
Verification is two short exponentiations regardless of ``t``.

The ``hashchain`` variant iterates SHA-256 and can only be checked by
recomputation; it exists so unit tests do not pay for big-integer work.
"""

from __future__ import annotations

import hashlib

import gmpy2

from .params import DelayKey

CHALLENGE_BITS = 128


def _width(modulus: int) -> int:
    return (modulus.bit_length() + 7) // 8


def hash_to_group(x: bytes, modulus: int) -> gmpy2.mpz:
    """Map bytes to a quadratic residue mod ``modulus`` other than 0 and 1."""
    width = _width(modulus)
    counter = 0
    while True:
        raw = hashlib.shake_256(
            b"asyncsc/vdf-input" + counter.to_bytes(4, "big") + x
        ).digest(width + 16)
        g = gmpy2.powmod(int.from_bytes(raw, "big") % modulus, 2, modulus)
        if g > 1:
            return g
        counter += 1


def hash_to_prime(g: int, y: int, t: int, modulus: int) -> gmpy2.mpz:
    width = _width(modulus)
    seed = (
        b"asyncsc/vdf-prime"
        + int(g).to_bytes(width, "big")
        + int(y).to_bytes(width, "big")
        + t.to_bytes(8, "big")
    )
    counter = 0
    while True:
        raw = hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()[: CHALLENGE_BITS // 8]
        candidate = gmpy2.mpz(int.from_bytes(raw, "big") | (1 << (CHALLENGE_BITS - 1)) | 1)
        if gmpy2.is_prime(candidate, 30):
            return candidate
        counter += 1


def _square_chain(g, t: int, modulus: int):
    # exponent 2^t has a single set bit: GMP performs exactly t squarings
    return gmpy2.powmod(g, gmpy2.mpz(1) << t, modulus)


def evaluate(key: DelayKey, x: bytes) -> tuple[bytes, bytes]:
    """Run ``key.t`` sequential steps on ``x``; return ``(output, proof)`` bytes."""
    if key.kind == "hashchain":
        return _hashchain(x, key.t), b""
    n = gmpy2.mpz(key.modulus)
    width = _width(key.modulus)
    g = hash_to_group(x, key.modulus)
    y = _square_chain(g, key.t, n)
    l = hash_to_prime(g, y, key.t, key.modulus)
    q = (gmpy2.mpz(1) << key.t) // l
    pi = gmpy2.powmod(g, q, n)
    return int(y).to_bytes(width, "big"), int(pi).to_bytes(width, "big")


def verify(key: DelayKey, x: bytes, output: bytes, proof: bytes) -> bool:
    if key.kind == "hashchain":
        return len(proof) == 0 and _hashchain(x, key.t) == output
    width = _width(key.modulus)
    if len(output) != width or len(proof) != width:
        return False
    n = gmpy2.mpz(key.modulus)
    y = gmpy2.mpz(int.from_bytes(output, "big"))
    pi = gmpy2.mpz(int.from_bytes(proof, "big"))
    if not (1 < y < n and 0 < pi < n):
        return False
    g = hash_to_group(x, key.modulus)
    l = hash_to_prime(g, y, key.t, key.modulus)
    r = gmpy2.powmod(2, key.t, l)
    return gmpy2.powmod(pi, l, n) * gmpy2.powmod(g, r, n) % n == y


def _hashchain(x: bytes, t: int) -> bytes:
    h = hashlib.sha256(b"asyncsc/hashchain" + x).digest()
    for _ in range(t):
        h = hashlib.sha256(h).digest()
    return h
