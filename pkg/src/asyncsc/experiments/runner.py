"""Run scenarios, check security properties and write artifacts."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field, fields

from ..errors import ConfigurationError, PropertyViolation
from ..strawman import run_sequential
from .asyncsc_sim import Outcome, RunArtifacts, run_asyncsc, verification_time_ms
from .scenario import RunMetrics, Scenario, metrics_csv
from .workload import make_workload

REJECTION_REASONS = ("bad-aggregate", "bad-delay", "unknown-signers", "digest-mismatch", "unknown-setup")

# short names accepted by sweep()
AXIS_ALIASES = {"delta": "delta_ms", "queue": "queue_size", "rate": "arrival_rate"}


def run_strawman(s: Scenario, trace=None) -> RunArtifacts:
    arrivals = make_workload(s.n, s.arrival_rate, s.dep_ratio, s.upload_max_ms, s.epoch_ms, s.seed)
    run = run_sequential(arrivals, s.net(), s.k, s.block_ms, s.strawman_retransmissions, trace)
    outcomes = {
        tid: Outcome(ok, settle, lat, reason) for tid, (ok, settle, lat, reason) in run.outcomes.items()
    }
    art = RunArtifacts(
        s, run.mc, run.sc, None, outcomes, [], {}, run.retransmissions,
        max((o.settle_ms for o in outcomes.values()), default=0.0),
        [(tid, 0, i) for i, tid in enumerate(run.order)],
        {a.tx.id: a.at for a in arrivals},
    )
    art.gen_ms = run.gen_ms
    art.ver_ms = run.ver_ms
    art.intervals = run.intervals
    return art


def execute(s: Scenario, trace=None) -> RunArtifacts:
    if s.mode == "strawman":
        return run_strawman(s, trace)
    art = run_asyncsc(s, trace)
    art.gen_ms = [t.gen_ms for t in art.tracks]
    art.ver_ms = [verification_time_ms(len(t.txset)) for t in art.tracks if t.accepted_at is not None]
    return art


def metrics_of(art: RunArtifacts) -> RunMetrics:
    s = art.scenario
    wins = [o for o in art.outcomes.values() if o.success]
    return RunMetrics(
        scenario_id=s.id,
        mode=s.mode,
        n=s.n,
        f=s.f,
        delta_ms=s.delta_ms,
        m=s.m,
        successes=len(wins),
        duration_ms=art.duration_ms,
        latencies=[o.latency_ms for o in wins],
        gen_ms=list(art.gen_ms),
        ver_ms=list(art.ver_ms),
        aborted=s.n - len(wins),
        retransmissions=art.retransmissions,
    )


@dataclass
class SecurityReport:
    scenario_id: str
    atomicity: list = field(default_factory=list)  # ids effective on one chain only
    ordering: list = field(default_factory=list)  # (earlier id, later id) inversions
    stability: list = field(default_factory=list)  # effective but not k-stable
    conservation: list = field(default_factory=list)
    forgeries_rejected: int = 0
    pipelined: bool | None = None

    @property
    def ok(self) -> bool:
        return not (self.atomicity or self.ordering or self.stability or self.conservation)

    def violated(self) -> list[str]:
        return [
            name
            for name in ("atomicity", "ordering", "stability", "conservation")
            if getattr(self, name)
        ]

    def to_text(self) -> str:
        def line(name, bad):
            return f"{name}: {'intact' if not bad else f'VIOLATED ({len(bad)})'}"

        out = [
            f"scenario: {self.scenario_id}",
            line("atomicity", self.atomicity),
            line("ordering", self.ordering),
            line("stability", self.stability),
            line("conservation", self.conservation),
            f"forgeries rejected: {self.forgeries_rejected}",
        ]
        if self.pipelined is not None:
            out.append(f"pipelined epochs observed: {'yes' if self.pipelined else 'no'}")
        for name in self.violated():
            for item in getattr(self, name)[:10]:
                out.append(f"  {name}: {item}")
        return "\n".join(out) + "\n"


def check_security_properties(art: RunArtifacts) -> SecurityReport:
    mc, sc = art.mc, art.sc
    rep = SecurityReport(art.scenario.id)
    on_mc = {tid for tid in mc.recorded_ids() if not mc.is_cancelled(tid)}
    on_sc = {tid for tid in sc.recorded_ids() if not sc.is_cancelled(tid)}
    rep.atomicity = sorted(tid.hex() for tid in on_mc ^ on_sc)

    pos = {r[0]: r[2] for r in art.view_records}
    last = None
    for tid in sc.ordered_ids():
        p = pos.get(tid)
        if p is None:
            rep.ordering.append(("unsequenced", tid.hex()))
            continue
        if last is not None and p < last[1]:
            rep.ordering.append((last[0].hex(), tid.hex()))
        last = (tid, p) if last is None or p > last[1] else last

    for tid in sorted(on_mc & on_sc):
        if not (mc.is_stable(tid) and sc.is_stable(tid)):
            rep.stability.append(tid.hex())
    for tid in mc.cancelled_ids:
        if mc.tip_height - mc.cancel_height(tid) < mc.k:
            rep.stability.append("cancel:" + tid.hex())

    if art.pool is not None:
        left = sum(art.pool.left.values())
        if art.pool.received_total != left or len(art.pool):
            rep.conservation.append(
                f"received {art.pool.received_total}, left {left}, still pooled {len(art.pool)}"
            )
    rep.forgeries_rejected = sum(art.rejections.get(r, 0) for r in REJECTION_REASONS)
    if art.tracks:
        tracks = sorted(art.tracks, key=lambda t: t.txset.epoch)
        rep.pipelined = any(b.built_at < a.settled_at for a, b in zip(tracks, tracks[1:]))
    return rep


def write_artifacts(art: RunArtifacts, metrics: RunMetrics, report: SecurityReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.csv"), "w") as fh:
        fh.write(metrics_csv([metrics]))
    for name, ledger in (("mc_ledger.csv", art.mc), ("sc_ledger.csv", art.sc)):
        with open(os.path.join(out_dir, name), "w") as fh:
            ledger.dump(fh)
    if art.pool is not None:
        with open(os.path.join(out_dir, "pool.csv"), "w") as fh:
            art.pool.dump(fh)
    with open(os.path.join(out_dir, "properties.txt"), "w") as fh:
        fh.write(report.to_text())


def run_scenario(s: Scenario, out_dir=None, trace: bool = False, strict: bool = True):
    """Run one scenario; returns ``(metrics, report, artifacts)``.

    With ``strict`` a violated security property raises
    :class:`PropertyViolation` after artifacts are written.
    """
    trace_fh = io.StringIO() if trace else None
    art = execute(s, trace_fh)
    metrics = metrics_of(art)
    report = check_security_properties(art)
    if out_dir is not None:
        write_artifacts(art, metrics, report, out_dir)
        if trace_fh is not None:
            with open(os.path.join(out_dir, "trace.log"), "w") as fh:
                fh.write("time_ms,type,endpoints,digest\n")
                fh.write(trace_fh.getvalue())
    if strict and not report.ok:
        raise PropertyViolation(",".join(report.violated()), f"scenario {s.id}")
    return metrics, report, art


def sweep(base: Scenario, axis: str, values, out_dir=None, seeds=None) -> list[RunMetrics]:
    """One run per value (and per seed when ``seeds`` is given)."""
    axis = AXIS_ALIASES.get(axis, axis)
    if axis not in {f.name for f in fields(Scenario)} or axis in ("name", "seed"):
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    rows = []
    for v in values:
        for seed in seeds if seeds is not None else [base.seed]:
            s = base.with_(**{axis: v, "seed": seed, "name": ""})
            rows.append(run_scenario(s)[0])
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"sweep_{axis}.csv"), "w") as fh:
            fh.write(metrics_csv(rows))
    return rows
