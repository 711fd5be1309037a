"""Command-line entry point."""

from __future__ import annotations

import argparse
import os
import sys

from .config import dump_config, load_config
from .das import calibrate_delay
from .errors import ConfigurationError, PropertyViolation
from .experiments import Scenario, metrics_csv, run_scenario, sweep

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _scenario(args) -> Scenario:
    s = load_config(args.config) if args.config else Scenario()
    if args.seed is not None:
        s = s.with_(seed=args.seed)
    return s


def _summary(m) -> str:
    return (
        f"{m.scenario_id}: tps={m.tps:.1f} tsr={m.tsr_pct:.2f}% "
        f"latency mean/p50/p95={m.latency_mean_ms:.0f}/{m.latency_p50_ms:.0f}/{m.latency_p95_ms:.0f} ms "
        f"aborted={m.aborted} retransmissions={m.retransmissions}"
    )


def cmd_simulate(args) -> int:
    s = _scenario(args)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.yaml"), "w") as fh:
        fh.write(dump_config(s))
    try:
        metrics, report, _ = run_scenario(s, args.out, trace=args.trace)
    except PropertyViolation as exc:
        print(f"property violation: {exc}; see {os.path.join(args.out, 'properties.txt')}", file=sys.stderr)
        return EXIT_VIOLATION
    print(_summary(metrics))
    return EXIT_OK


def _parse_values(raw: str):
    out = []
    for item in raw.split(","):
        item = item.strip()
        for cast in (int, float):
            try:
                out.append(cast(item))
                break
            except ValueError:
                continue
        else:
            out.append(item)
    return out


def cmd_sweep(args) -> int:
    s = _scenario(args)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.yaml"), "w") as fh:
        fh.write(dump_config(s))
    seeds = list(range(s.seed, s.seed + args.seeds)) if args.seeds > 1 else None
    try:
        rows = sweep(s, args.axis, _parse_values(args.values), args.out, seeds)
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    sys.stdout.write(metrics_csv(rows))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cal = calibrate_delay(args.target_ms, args.security_bits)
    print(f"rate={cal.rate:.2f} steps/ms target={cal.target_ms:.0f} ms t={cal.t}")
    return EXIT_OK


def cmd_verify(args) -> int:
    s = _scenario(args)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.yaml"), "w") as fh:
        fh.write(dump_config(s))
    _, report, _ = run_scenario(s, args.out, trace=args.trace, strict=False)
    path = os.path.join(args.out, "properties.txt")
    text = report.to_text()
    print(text, end="")
    if not report.ok:
        print(f"property violation; report at {path}", file=sys.stderr)
        return EXIT_VIOLATION
    if report.forgeries_rejected:
        # the run carried forged proofs: flagged even though they were caught
        print(f"forgery rejected ({report.forgeries_rejected} proofs); atomicity intact; report at {path}",
              file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asyncsc", description="Asynchronous cross-chain simulation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", metavar="PATH", help="flat YAML scenario file")
        sp.add_argument("--out", metavar="DIR", default=out_default, help="output directory")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--trace", action="store_true", help="write an event trace log")

    sim = sub.add_parser("simulate", help="run one scenario")
    common(sim, "out")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="run a scenario over one parameter axis")
    common(sw, "out")
    sw.add_argument("--axis", required=True, help="scenario field to vary, e.g. delta_ms")
    sw.add_argument("--values", required=True, help="comma separated values")
    sw.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds per value")
    sw.set_defaults(func=cmd_sweep)

    cal = sub.add_parser("calibrate", help="measure delay steps for a target duration")
    cal.add_argument("--target-ms", type=float, default=500.0)
    cal.add_argument("--security-bits", type=int, default=128, choices=(128, 192, 256))
    cal.add_argument("--config", metavar="PATH", help=argparse.SUPPRESS)
    cal.add_argument("--out", metavar="DIR", help=argparse.SUPPRESS)
    cal.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    cal.add_argument("--trace", action="store_true", help=argparse.SUPPRESS)
    cal.set_defaults(func=cmd_calibrate)

    ver = sub.add_parser("verify-properties", help="run a scenario and check security properties")
    common(ver, "out")
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
