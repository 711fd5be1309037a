import io
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncsc.errors import ConfigurationError, RunError
from asyncsc.netsim import EventLoop, NetConfig, Network, SimClock, run_until, send


def test_defaults_and_derived_distribution():
    cfg = NetConfig()
    assert (cfg.delay_min, cfg.delay_max, cfg.jitter, cfg.delta_async) == (100, 500, 25, 10_000)
    assert cfg.mean == 300
    assert cfg.stddev == pytest.approx(66.67, abs=0.01)


@pytest.mark.parametrize("kw", [{"f": -0.1}, {"f": 1.5}, {"mode": "lossy"}, {"delay_min": 600}, {"delta_async": 400}])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        NetConfig(**kw)


def test_no_timeout_deliveries_stay_in_jittered_bounds():
    net = Network(NetConfig(f=0, seed=4))
    delays = [net.sample(0).delay for _ in range(5000)]
    assert min(delays) >= 75 and max(delays) <= 525
    # clamped normal around 300: sample mean close to the configured centre
    assert statistics.fmean(delays) == pytest.approx(300, abs=5)


def test_base_delay_is_clamped():
    net = Network(NetConfig(seed=1))
    base = [net.base_delay() for _ in range(20000)]
    assert 100 <= min(base) and max(base) <= 500


def test_all_messages_time_out_at_f_one():
    net = Network(NetConfig(f=1, seed=2))
    for _ in range(500):
        d = net.sample(1000)
        assert d.timed_out and d.delay > 10_000
    assert net.timeouts == net.sent == 500


def test_same_seed_same_schedule():
    def schedule(seed):
        net = Network(NetConfig(f=0.3, seed=seed))
        return [send(net.cfg, b"x", "MC", "SC", 10.0 * i, net) for i in range(300)]

    assert schedule(8) == schedule(8)
    assert schedule(8) != schedule(9)


def test_synchronous_mode_is_fixed_delay():
    net = Network(NetConfig(mode="synchronous", sync_delay=100, f=0.9))
    assert {net.sample(5).delay for _ in range(50)} == {100}


@settings(max_examples=12, deadline=None)
@given(st.sampled_from([0.0, 0.1, 0.3, 0.5, 0.7, 1.0]), st.integers(0, 10**6))
def test_timeout_fidelity(f, seed):
    cfg = NetConfig(f=f, seed=seed)
    net = Network(cfg)
    over = sum(net.sample(0).delay > cfg.delta_async for _ in range(10_000))
    assert abs(over / 10_000 - f) <= 0.02


# -- event loop ------------------------------------------------------------


def test_empty_loop_is_quiescent():
    assert run_until(EventLoop()) == 0


def test_equal_due_events_run_in_ordinal_order():
    loop, seen = EventLoop(), []
    for name in "abc":
        loop.at(10, seen.append, name)
    loop.at(5, seen.append, "first")
    assert run_until(loop) == 4
    assert seen == ["first", "a", "b", "c"]
    assert loop.now == 10


def test_run_until_end_time_and_cancellation():
    loop, seen = EventLoop(), []
    loop.at(10, seen.append, 1)
    ev = loop.at(20, seen.append, 2)
    loop.at(40, seen.append, 3)
    ev.cancelled = True
    assert run_until(loop, end_time=30) == 1
    assert loop.now == 30 and seen == [1]
    assert run_until(loop) == 1 and seen == [1, 3]


def test_handler_failure_carries_event():
    loop = EventLoop()

    def boom():
        raise ValueError("bad")

    loop.at(7, boom, kind="boom")
    with pytest.raises(RunError) as info:
        run_until(loop)
    assert info.value.event.kind == "boom" and info.value.event.due == 7


def test_cannot_schedule_in_the_past():
    loop = EventLoop()
    loop.at(10, lambda: None)
    run_until(loop)
    with pytest.raises(RunError):
        loop.at(5, lambda: None)


def test_clock_is_monotone():
    clock = SimClock()
    clock.advance(5)
    with pytest.raises(RunError):
        clock.advance(4)
    assert clock.now == 5


def test_network_send_schedules_and_traces():
    trace = io.StringIO()
    loop = EventLoop(trace)
    got = []
    net = Network(NetConfig(seed=3))
    _, d = net.send(loop, b"payload", "MC", "SC", lambda msg, dl: got.append((loop.now, msg)))
    run_until(loop)
    assert got == [(d.due, b"payload")]
    time_ms, kind, ends, digest = trace.getvalue().strip().split(",")
    assert kind == "send" and ends == "MC->SC" and len(digest) == 12
