"""Plain-text test vectors.

Layout::

    # vk <hex of VerificationKey.to_bytes()>
    <M hex> <pk hex,pk hex,...> <commitment hex> <1|0>

Blank lines and other ``#`` lines are ignored. One vk header applies to every
record that follows it.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParameterError
from .keys import PK_SIZE, PublicKey, key_agg
from .params import VerificationKey
from .scheme import DasCommitment, das_verify


@dataclass(frozen=True)
class Vector:
    message: bytes
    pks: tuple
    commitment: DasCommitment
    expected: bool


def write_vectors(path, vk: VerificationKey, vectors) -> None:
    with open(path, "w") as fh:
        fh.write(f"# vk {vk.to_bytes().hex()}\n")
        for v in vectors:
            pks = ",".join(pk.data.hex() for pk in v.pks)
            fh.write(f"{v.message.hex()} {pks} {v.commitment.to_bytes().hex()} {int(v.expected)}\n")


def read_vectors(path):
    """Yield ``(vk, Vector)`` pairs."""
    vk = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "vk":
                    vk = VerificationKey.from_bytes(bytes.fromhex(parts[1]))
                continue
            if vk is None:
                raise ParameterError(f"line {lineno}: record before vk header")
            try:
                m_hex, pk_hex, c_hex, verdict = line.split()
                pks = tuple(
                    PublicKey(bytes.fromhex(h), vk.system) for h in pk_hex.split(",")
                )
                if any(len(pk.data) != PK_SIZE for pk in pks) or verdict not in ("0", "1"):
                    raise ValueError
                c = DasCommitment.from_bytes(bytes.fromhex(c_hex), vk)
            except ValueError as exc:
                raise ParameterError(f"line {lineno}: malformed record") from exc
            yield vk, Vector(bytes.fromhex(m_hex), pks, c, verdict == "1")


def check_vectors(path) -> list[int]:
    """Return indices of records whose verdict disagrees with the file."""
    bad = []
    for i, (vk, v) in enumerate(read_vectors(path)):
        try:
            apk = key_agg(v.pks)
        except ValueError:
            got = False
        else:
            got = bool(das_verify(v.message, apk, v.commitment, vk))
        if got != v.expected:
            bad.append(i)
    return bad
