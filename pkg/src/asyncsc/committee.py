"""Organizations, committee election and the committee signing round."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .chain import CrossTxSet
from .das import KeyPair, PartialSig, SysParams, key_gen, pop_verify, sign
from .errors import ConfigurationError, InputError, RoundError

MEMBER = "member"
COMMITTEE = "committee"
LEADER = "leader"


@dataclass
class Node:
    id: str
    keys: KeyPair
    election_value: int = 0
    role: str = MEMBER
    certificate: object = None

    @property
    def pk(self):
        return self.keys.pk


@dataclass(frozen=True)
class ElectionPeriod:
    period: int
    epochs_per_period: int
    committee: tuple  # member ids, leader first
    leader: str

    @property
    def size(self) -> int:
        return len(self.committee)


def make_org(name: str, size: int, sp: SysParams, seed=0) -> list[Node]:
    """``size`` nodes with reproducible keys; proofs of possession are checked."""
    if size < 1:
        raise ConfigurationError("an organization needs at least one node")
    rng = random.Random(f"{seed}:keys:{name}")
    nodes = []
    for i in range(size):
        kp = key_gen(sp, rng)
        if not pop_verify(kp.pk, kp.pop):
            raise InputError(f"proof of possession failed for {name}-{i}")
        nodes.append(Node(f"{name}-{i}", kp))
    return nodes


def register_node(org: list[Node], node_id: str, keys: KeyPair) -> Node:
    """Admit an externally generated key; its proof of possession must check."""
    if any(n.id == node_id for n in org):
        raise InputError(f"node id {node_id} already registered")
    if not pop_verify(keys.pk, keys.pop):
        raise InputError(f"proof of possession failed for {node_id}")
    node = Node(node_id, keys)
    org.append(node)
    return node


def election_values(ids, seed, period: int = 0) -> dict[str, int]:
    rng = random.Random(f"{seed}:elect:{period}")
    return {nid: rng.getrandbits(64) for nid in sorted(ids)}


def elect(org: list[Node], m: int, seed=0, period: int = 0, epochs_per_period: int = 1000) -> ElectionPeriod:
    """Seeded stand-in election: the top ``m`` values form the committee."""
    if not 1 <= m <= len(org):
        raise ConfigurationError(f"committee size {m} outside 1..{len(org)}")
    values = election_values([n.id for n in org], seed, period)
    for n in org:
        n.election_value = values[n.id]
        n.role = MEMBER
    ranked = sorted(org, key=lambda n: (-n.election_value, n.id))[:m]
    for n in ranked:
        n.role = COMMITTEE
    ranked[0].role = LEADER
    return ElectionPeriod(period, epochs_per_period, tuple(n.id for n in ranked), ranked[0].id)


def quorum(m: int) -> int:
    return m // 2 + 1


@dataclass
class SigningRound:
    pairs: list = field(default_factory=list)  # PartialSig, each carries its signer pk
    wall_ms: float = 0.0
    omitted: tuple = ()

    def __iter__(self):
        return iter((s.signer, s) for s in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def committee_sign(txset: CrossTxSet, committee: list[Node], omit=()) -> SigningRound:
    """Each non-omitting member signs the set digest; needs a majority."""
    if not committee:
        raise InputError("empty committee")
    omit = set(omit)
    start = time.perf_counter()
    pairs: list[PartialSig] = [sign(n.keys.sk, txset.digest) for n in committee if n.id not in omit]
    wall = (time.perf_counter() - start) * 1e3
    if len(pairs) < quorum(len(committee)):
        raise RoundError(f"{len(pairs)} of {len(committee)} signatures, need {quorum(len(committee))}")
    return SigningRound(pairs, wall, tuple(sorted(omit)))


def signing_time_ms(m: int, base: float = 10.0, per_member: float = 2.0) -> float:
    """Modeled duration of one signing round in simulated time."""
    return base + per_member * m


def roster_bitmap(roster, signers) -> bytes:
    """Bit ``i`` set iff ``roster[i]`` is among ``signers`` (public keys)."""
    keys = {pk.data for pk in signers}
    bits = bytearray((len(roster) + 7) // 8)
    for i, pk in enumerate(roster):
        if pk.data in keys:
            bits[i // 8] |= 1 << (i % 8)
    return bytes(bits)


def bitmap_members(roster, bitmap: bytes):
    """Inverse of :func:`roster_bitmap`; ``None`` if bits point outside the roster."""
    if len(bitmap) != (len(roster) + 7) // 8:
        return None
    out = []
    for i in range(len(bitmap) * 8):
        if bitmap[i // 8] >> (i % 8) & 1:
            if i >= len(roster):
                return None
            out.append(roster[i])
    return out
