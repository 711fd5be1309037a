"""Host calibration: how many delay steps fit in a target wall-clock budget."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

from ..errors import InputError
from . import delay
from .params import SysParams, par_gen, pub_params

MIN_BENCH_MS = 200.0
# fixed seed keeps the benchmark group identical between calibrations
BENCH_SEED = "calibration"


@dataclass(frozen=True)
class DelayCalibration:
    rate: float  # steps per millisecond
    target_ms: float
    t: int


def _bench_params(security_bits: int) -> SysParams:
    sp, _ = par_gen(security_bits, 1, seed=BENCH_SEED)
    return sp


def measure_rate(security_bits: int = 128, min_ms: float = MIN_BENCH_MS) -> float:
    """Steps per millisecond of evaluate+prove, timed over at least ``min_ms``."""
    sp = _bench_params(security_bits)
    x = os.urandom(32)
    delay.evaluate(pub_params(sp, 256).ek, x)  # warm caches
    t = 4096
    while True:
        key = pub_params(sp, t).ek
        start = time.perf_counter()
        delay.evaluate(key, x)
        elapsed = (time.perf_counter() - start) * 1e3
        if elapsed >= min_ms:
            return t / elapsed
        # aim a little past the floor so the next round usually suffices
        t = int(t * max(2.0, 1.25 * min_ms / max(elapsed, 1e-3)))


def calibrate_delay(target_ms: float, security_bits: int = 128) -> DelayCalibration:
    if not target_ms > 0:
        raise InputError(f"target delay must be positive, got {target_ms!r}")
    rate = measure_rate(security_bits)
    return DelayCalibration(rate, float(target_ms), max(1, round(rate * target_ms)))
