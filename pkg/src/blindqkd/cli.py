"""Command-line front end: ``blindqkd run | enumerate | selftest``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import Sequence

from .analysis import DEFAULT_THRESHOLD
from .harness import STRATEGIES, SimConfig, SimReport, enumerate_exhaustive, parse_angles, run

CSV_HEADER = ("round", "k_alice", "k_bob", "s", "b", "l", "eve_guess")


def _protocol(value: str) -> int:
    if value not in ("1", "2"):
        raise argparse.ArgumentTypeError(f"must be 1 or 2, got {value!r}")
    return int(value)


def _positive_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _seed(value: str) -> int:
    try:
        n = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("must be a 64-bit unsigned integer")
    return n


def _angles(value: str) -> str:
    try:
        parse_angles(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return value


def _threshold(value: str) -> float:
    try:
        t = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None
    if not 0.0 < t < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {t}")
    return t


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindqkd",
        description="Simulate blind-polarization-basis QKD rounds under eavesdropping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate rounds and write a report")
    p_run.add_argument("--protocol", type=_protocol, default=1)
    p_run.add_argument("--attack", choices=STRATEGIES, default="none")
    p_run.add_argument("--rounds", type=_positive_int, default=10000)
    p_run.add_argument("--seed", type=_seed, default=0)
    p_run.add_argument("--angles", type=_angles, default="continuous",
                       help="'continuous' (default) or 'grid:K' for multiples of pi/K")
    p_run.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD,
                       help="QBER above which an eavesdropper is flagged (default 0.05)")
    p_run.add_argument("--out", type=Path, help="JSON report path")
    p_run.add_argument("--rounds-csv", type=Path, help="per-round CSV dump path")
    p_run.add_argument("--workers", type=_positive_int, default=1,
                       help="threads; results do not depend on this")

    p_enum = sub.add_parser("enumerate", help="exhaustive grid oracle for one protocol/attack")
    p_enum.add_argument("--protocol", type=_protocol, default=1)
    p_enum.add_argument("--attack", choices=STRATEGIES, default="none")
    p_enum.add_argument("--grid", type=_positive_int, default=8)

    sub.add_parser("selftest", help="run the exhaustive oracles and honest-correctness checks")
    return parser


def write_rounds_csv(report: SimReport, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in report.records:
            row = (r.round, r.k_alice, r.k_bob, r.s, r.b, r.l, r.eve_guess)
            writer.writerow("" if v is None else v for v in row)


def emit_report(report: SimReport, path: Path, fmt: str = "json") -> None:
    if fmt == "json":
        Path(path).write_text(report.to_json())
    elif fmt == "csv":
        write_rounds_csv(report, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.6f}"


def summary_line(report: SimReport) -> str:
    return (
        f"rounds={report.rounds} aborted={report.aborted} qber={_fmt(report.qber)} "
        f"eve_accuracy={_fmt(report.eve_accuracy)} mi_ab={_fmt(report.mi_ab)} "
        f"mi_ae={_fmt(report.mi_ae)} detected={str(report.detected).lower()}"
    )


def cmd_run(args: argparse.Namespace) -> int:
    config = SimConfig(
        protocol=args.protocol,
        attack=args.attack,
        rounds=args.rounds,
        seed=args.seed,
        angles=args.angles,
        threshold=args.threshold,
        out=args.out,
        rounds_csv=args.rounds_csv,
    )
    report = run(config, workers=args.workers)
    try:
        if config.out is not None:
            emit_report(report, config.out, "json")
        if config.rounds_csv is not None:
            emit_report(report, config.rounds_csv, "csv")
    except OSError as exc:
        print(f"blindqkd: cannot write output: {exc}", file=sys.stderr)
        return 1
    print(summary_line(report))
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    if args.grid < 2:
        print("blindqkd: argument --grid: must be >= 2", file=sys.stderr)
        return 2
    result = enumerate_exhaustive(args.protocol, args.attack, args.grid)
    failed = result.failed
    print(
        f"protocol={args.protocol} attack={args.attack} grid={args.grid} "
        f"combinations={result.count} failed={len(failed)}"
    )
    for row in failed[:10]:
        print(f"  FAIL {row.params}: {', '.join(row.failures)}")
    return 0 if result.all_passed else 1


def selftest_checks() -> list[tuple[str, bool]]:
    checks = []
    for protocol, attack, grid in ((1, "none", 8), (2, "none", 4), (1, "impersonation", 8), (2, "impersonation", 4)):
        res = enumerate_exhaustive(protocol, attack, grid)
        checks.append((f"enumerate P{protocol} {attack} grid {grid} ({res.count} cases)", res.all_passed))
    for protocol in (1, 2):
        rep = run(SimConfig(protocol=protocol, attack="none", rounds=10000, seed=1))
        checks.append((f"honest P{protocol} 10^4 rounds qber == 0", rep.qber == 0.0))
        rep = run(SimConfig(protocol=protocol, attack="impersonation", rounds=10000, seed=1))
        checks.append((
            f"impersonation P{protocol} 10^4 rounds undetected with full key",
            rep.qber == 0.0 and rep.eve_accuracy == 1.0 and not rep.detected,
        ))
    rep = run(SimConfig(protocol=1, attack="intercept-resend", rounds=10000, seed=1))
    checks.append(("intercept-resend P1 10^4 rounds detected", rep.detected))
    return checks


def cmd_selftest(args: argparse.Namespace) -> int:
    ok = True
    for name, passed in selftest_checks():
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    return 0 if ok else 1


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "enumerate": cmd_enumerate, "selftest": cmd_selftest}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
