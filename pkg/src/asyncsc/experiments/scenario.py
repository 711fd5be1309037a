"""Scenario description and run metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..errors import ConfigurationError
from ..netsim import MODES, NetConfig
from ..seqguard import POLICIES

RUN_MODES = ("asyncsc", "strawman")


@dataclass(frozen=True)
class Scenario:
    mode: str = "asyncsc"
    n: int = 1000
    arrival_rate: float = 2000.0  # CTx per second
    f: float = 0.0
    delay_min_ms: float = 100.0
    delay_max_ms: float = 500.0
    jitter_ms: float = 25.0
    delta_async_ms: float = 10_000.0
    net_mode: str = "asynchronous"
    epoch_ms: float = 600.0
    block_ms: float = 100.0
    k: int = 5
    m: int = 5
    org_size: int = 20
    delta_ms: float = 500.0  # target DAS delay
    delay_steps: int = 256  # sequential steps actually evaluated in simulations
    security_bits: int = 128
    queue_size: int = 2000
    window: int = 400
    window_min: int = 300
    policy: str = "dependency"
    dep_ratio: float = 0.2
    upload_max_ms: float = 100.0
    max_retransmissions: int = 3
    strawman_retransmissions: int = 0
    forge_epoch: int = -1  # epoch whose aggregate is forged; -1 disables
    duplicate_ratio: float = 0.0
    reorder_ratio: float = 0.0
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in RUN_MODES:
            raise ConfigurationError(f"mode must be one of {RUN_MODES}")
        if self.policy not in POLICIES:
            raise ConfigurationError(f"policy must be one of {POLICIES}")
        if self.net_mode not in MODES:
            raise ConfigurationError(f"net_mode must be one of {MODES}")
        for key in ("n", "k", "m", "org_size", "queue_size", "window", "window_min",
                    "delay_steps", "arrival_rate", "epoch_ms", "block_ms", "delta_ms"):
            value = getattr(self, key)
            if not value > 0 and not (key == "k" and value == 0):
                raise ConfigurationError(f"{key} must be positive, got {value!r}")
        for key in ("f", "dep_ratio", "duplicate_ratio", "reorder_ratio"):
            if not 0.0 <= getattr(self, key) <= 1.0:
                raise ConfigurationError(f"{key} must lie in [0, 1]")
        if self.max_retransmissions < 0 or self.strawman_retransmissions < 0:
            raise ConfigurationError("retransmission limits cannot be negative")
        if self.m > self.org_size:
            raise ConfigurationError("committee size m exceeds org_size")
        if self.epoch_ms % self.block_ms:
            raise ConfigurationError("epoch_ms must be a multiple of block_ms")
        if self.upload_max_ms < 0:
            raise ConfigurationError("upload_max_ms cannot be negative")

    @property
    def id(self) -> str:
        if self.name:
            return self.name
        return f"{self.mode}-n{self.n}-f{self.f:g}-d{self.delta_ms:g}-m{self.m}-{self.policy}-s{self.seed}"

    def net(self) -> NetConfig:
        return NetConfig(
            delay_min=self.delay_min_ms,
            delay_max=self.delay_max_ms,
            jitter=self.jitter_ms,
            f=self.f,
            delta_async=self.delta_async_ms,
            seed=self.seed,
            mode=self.net_mode,
        )

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


METRIC_COLUMNS = [
    "scenario_id", "mode", "n", "f", "delta_ms", "m", "tps",
    "latency_mean_ms", "latency_p50_ms", "latency_p95_ms", "tsr_pct",
    "gen_ms_mean", "ver_ms_mean", "aborted", "retransmissions",
]


@dataclass
class RunMetrics:
    scenario_id: str
    mode: str
    n: int
    f: float
    delta_ms: float
    m: int
    successes: int
    duration_ms: float
    latencies: list = field(default_factory=list, repr=False)
    gen_ms: list = field(default_factory=list, repr=False)
    ver_ms: list = field(default_factory=list, repr=False)
    aborted: int = 0
    retransmissions: int = 0

    @property
    def tps(self) -> float:
        return self.successes / (self.duration_ms / 1000) if self.duration_ms > 0 else 0.0

    @property
    def tsr_pct(self) -> float:
        return 100.0 * self.successes / self.n if self.n else 0.0

    def _stat(self, values, q=None) -> float:
        if not values:
            return math.nan
        arr = np.asarray(values, dtype=float)
        return float(arr.mean() if q is None else np.percentile(arr, q))

    @property
    def latency_mean_ms(self) -> float:
        return self._stat(self.latencies)

    @property
    def latency_p50_ms(self) -> float:
        return self._stat(self.latencies, 50)

    @property
    def latency_p95_ms(self) -> float:
        return self._stat(self.latencies, 95)

    @property
    def gen_ms_mean(self) -> float:
        return self._stat(self.gen_ms)

    @property
    def ver_ms_mean(self) -> float:
        return self._stat(self.ver_ms)

    def row(self) -> dict:
        return {c: getattr(self, c) for c in METRIC_COLUMNS}


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.row()[c]) for c in METRIC_COLUMNS])
    return buf.getvalue()
