"""Seeded sensor workload: Poisson initiations with upload latency."""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

from ..chain import SEND, CrossTx, EpochClock

DEP_LOOKBACK = 100


@dataclass(frozen=True)
class Arrival:
    tx: CrossTx
    at: float  # time the send reaches the source chain, ms


def make_workload(
    n: int,
    arrival_rate: float,
    dep_ratio: float = 0.2,
    upload_max_ms: float = 100.0,
    epoch_ms: float = 600.0,
    seed=0,
) -> list[Arrival]:
    """``n`` transactions sorted by source-chain arrival time.

    Device timestamps follow a Poisson process; each upload adds a uniform
    latency, so arrival order can differ from timestamp order. A
    dependency, when present, points at one of the recent earlier-stamped
    transactions.
    """
    rng = random.Random(f"{seed}:workload")
    clock = EpochClock(epoch_ms)
    gap = 1000.0 / arrival_rate
    ts = 0.0
    ids: list[bytes] = []
    out = []
    for i in range(n):
        ts += rng.expovariate(1.0 / gap)
        tid = rng.randbytes(16)
        at = round(ts + rng.uniform(0.0, upload_max_ms), 3)
        deps = ()
        if ids and rng.random() < dep_ratio:
            deps = (ids[rng.randrange(max(0, i - DEP_LOOKBACK), i)],)
        weight = rng.randint(1, 100)
        payload = struct.pack(">Id", i, rng.gauss(20.0, 5.0))  # sensor index and reading
        tx = CrossTx(tid, clock.epoch_of(at), SEND, "MC", "SC", payload, round(ts, 3), weight, deps)
        ids.append(tid)
        out.append(Arrival(tx, at))
    out.sort(key=lambda a: (a.at, a.tx.id))
    return out
