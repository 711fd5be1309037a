"""Deterministic discrete-event loop and inter-chain network model."""

from __future__ import annotations

import hashlib
import heapq
import itertools
import random
from dataclasses import dataclass, field

from .errors import ConfigurationError, RunError

MODES = ("synchronous", "semi-synchronous", "asynchronous")


@dataclass(frozen=True)
class NetConfig:
    delay_min: float = 100.0
    delay_max: float = 500.0
    jitter: float = 25.0
    f: float = 0.0
    delta_async: float = 10_000.0
    seed: int = 0
    mode: str = "asynchronous"
    sync_delay: float = 100.0  # fixed one-way delay in synchronous mode
    late_extra_max: float = 5_000.0  # spread of deliveries past the timeout

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown network mode {self.mode!r}")
        if not 0.0 <= self.f <= 1.0:
            raise ConfigurationError("timeout ratio f must lie in [0, 1]")
        if not 0 <= self.delay_min <= self.delay_max:
            raise ConfigurationError("delay bounds must satisfy 0 <= min <= max")
        if self.delta_async <= self.delay_max + self.jitter:
            raise ConfigurationError("delta_async must exceed the largest ordinary delay")

    @property
    def mean(self) -> float:
        return (self.delay_min + self.delay_max) / 2

    @property
    def stddev(self) -> float:
        return (self.delay_max - self.delay_min) / 6


@dataclass
class Event:
    due: float
    ordinal: int
    handler: object = field(repr=False)
    args: tuple = field(default=(), repr=False)
    kind: str = ""
    cancelled: bool = False

    def __lt__(self, other: "Event") -> bool:
        return (self.due, self.ordinal) < (other.due, other.ordinal)


@dataclass
class SimClock:
    now: float = 0.0

    def advance(self, t: float) -> None:
        if t < self.now:
            raise RunError(f"clock moved backwards: {t} < {self.now}")
        self.now = t


class EventLoop:
    def __init__(self, trace=None):
        self.clock = SimClock()
        self._queue: list[Event] = []
        self._ordinals = itertools.count()
        self.processed = 0
        self.trace = trace  # writable text handle or None

    @property
    def now(self) -> float:
        return self.clock.now

    def __len__(self) -> int:
        return len(self._queue)

    def at(self, due: float, handler, *args, kind: str = "") -> Event:
        if due < self.now:
            raise RunError(f"cannot schedule in the past ({due} < {self.now})")
        ev = Event(due, next(self._ordinals), handler, args, kind)
        heapq.heappush(self._queue, ev)
        return ev

    def after(self, delay: float, handler, *args, kind: str = "") -> Event:
        return self.at(self.now + delay, handler, *args, kind=kind)

    def log(self, kind: str, endpoints: str = "", msg: bytes = b"") -> None:
        if self.trace is not None:
            digest = hashlib.sha256(msg).hexdigest()[:12] if msg else "-"
            self.trace.write(f"{self.now:.3f},{kind},{endpoints},{digest}\n")

    def step(self) -> bool:
        while self._queue:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.clock.advance(ev.due)
            try:
                ev.handler(*ev.args)
            except RunError:
                raise
            except Exception as exc:
                raise RunError(f"handler {ev.kind or ev.handler!r} failed at {ev.due:.3f} ms: {exc}", ev) from exc
            self.processed += 1
            return True
        return False


def run_until(loop: EventLoop, end_time: float | None = None, max_events: int | None = None) -> int:
    """Process events in (due, ordinal) order; stop at ``end_time`` or quiescence."""
    count = 0
    while loop._queue:
        head = loop._queue[0]
        if head.cancelled:
            heapq.heappop(loop._queue)
            continue
        if end_time is not None and head.due > end_time:
            loop.clock.advance(max(loop.now, end_time))
            break
        if loop.step():
            count += 1
        if max_events is not None and count >= max_events:
            break
    return count


@dataclass(frozen=True)
class Delivery:
    sent: float
    due: float
    timed_out: bool

    @property
    def delay(self) -> float:
        return self.due - self.sent


class Network:
    """Samples per-message delays; timed-out messages still arrive, late."""

    def __init__(self, cfg: NetConfig, stream: str = "net"):
        self.cfg = cfg
        self.rng = random.Random(f"{cfg.seed}:{stream}")
        self.sent = 0
        self.timeouts = 0

    def base_delay(self) -> float:
        c = self.cfg
        if c.mode == "synchronous":
            return c.sync_delay
        d = self.rng.gauss(c.mean, c.stddev)
        return min(c.delay_max, max(c.delay_min, d))

    def sample(self, now: float) -> Delivery:
        c = self.cfg
        self.sent += 1
        base = self.base_delay()
        if c.mode == "synchronous":
            return Delivery(now, now + base, False)
        delay = max(0.0, base + self.rng.uniform(-c.jitter, c.jitter))
        if c.mode == "asynchronous" and c.f > 0 and self.rng.random() < c.f:
            self.timeouts += 1
            extra = 1.0 + self.rng.uniform(0.0, c.late_extra_max)
            return Delivery(now, now + c.delta_async + extra, True)
        return Delivery(now, now + delay, False)

    def send(self, loop: EventLoop, msg: bytes, src: str, dst: str, handler) -> tuple[Event, Delivery]:
        """Schedule ``handler(msg, delivery)`` at the sampled arrival time."""
        d = self.sample(loop.now)
        loop.log("send", f"{src}->{dst}", msg)
        ev = loop.at(d.due, handler, msg, d, kind=f"deliver:{src}->{dst}")
        return ev, d


def send(cfg: NetConfig, msg: bytes, src: str, dst: str, now: float, net: Network | None = None) -> Delivery:
    """Stateless convenience wrapper: one delivery sample for ``msg``."""
    return (net or Network(cfg)).sample(now)
