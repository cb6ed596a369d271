"""Command line: ``andwc run|compare|validate|list``.

Exit status is 0 when every declared expectation holds, 1 when one fails
and 2 for an unreadable or invalid scenario.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import report
from .ms_agent import Strategy
from .runner import Metrics, check_expectations, run_scenario
from .scenario import Scenario, ScenarioError, bundled_names, load_scenario

EXIT_OK = 0
EXIT_EXPECTATION_FAILED = 1
EXIT_BAD_SCENARIO = 2


def _load(source: str) -> Scenario:
    return load_scenario(source)


def _print_metrics(m: Metrics) -> None:
    print(f"scenario {m.scenario}  seed {m.seed}  mode {m.mode or '-'}")
    if m.handoffs:
        print(report.format_table(report.HANDOFF_COLUMNS[2:], report.handoff_rows(m)))
    else:
        print("no handoffs")
    for name, value in m.values().items():
        print(f"  {name} = {'-' if value is None else f'{value:g}'}")


def _check(sc: Scenario, m: Metrics) -> bool:
    ok = True
    for r in check_expectations(sc, m):
        e = r.expectation
        bounds = f"[{'-inf' if e.min is None else f'{e.min:g}'}, {'inf' if e.max is None else f'{e.max:g}'}]"
        value = "-" if r.value is None else f"{r.value:g}"
        print(f"{'PASS' if r.passed else 'FAIL'} {e.metric} = {value} in {bounds}")
        ok = ok and r.passed
    return ok


def cmd_run(args) -> int:
    sc = _load(args.scenario)
    m, log_lines = run_scenario(sc, args.seed, record_log=args.log is not None)
    _print_metrics(m)
    if args.csv:
        paths = report.emit_csv(m, args.csv)
        print("wrote " + ", ".join(str(p) for p in paths))
    if args.log:
        Path(args.log).write_text("".join(line + "\n" for line in log_lines))
        print(f"wrote {args.log}")
    return EXIT_OK if _check(sc, m) else EXIT_EXPECTATION_FAILED


def cmd_compare(args) -> int:
    sc = _load(args.scenario)
    runs = []
    ok = True
    for strategy in (Strategy.ANDWC, Strategy.BASELINE_FULL_SCAN):
        variant = sc.with_mode(strategy)
        m, _ = run_scenario(variant, args.seed, record_log=False)
        runs.append(m)
        print(f"-- {strategy.value}")
        ok = _check(variant, m) and ok
    print(report.format_table(report.COMPARE_COLUMNS, report.compare_rows(runs)))
    lost = [m.scalar("packets_lost") for m in runs]
    if lost[0]:
        print(f"loss ratio baseline/andwc = {lost[1] / lost[0]:.1f}")
    if args.csv:
        print(f"wrote {report.emit_compare_csv(runs, args.csv)}")
    return EXIT_OK if ok else EXIT_EXPECTATION_FAILED


def cmd_validate(args) -> int:
    sc = _load(args.scenario)
    print(f"{sc.name}: ok ({len(sc.aps)} APs, {len(sc.mss)} MSs, "
          f"{len(sc.traffic)} streams, {len(sc.expect)} expectations)")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="andwc", description="ANDWC handoff simulator")
    sub = p.add_subparsers(dest="command", required=True)
    hint = "scenario YAML file or bundled scenario name"

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("scenario", help=hint)
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--csv", metavar="PATH", help="write the handoff table (plus PATH.summary.csv)")
    run.add_argument("--log", metavar="PATH", help="write the event log")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="run the scenario as andwc and as baseline_full_scan")
    cmp_.add_argument("scenario", help=hint)
    cmp_.add_argument("--seed", type=int, default=None)
    cmp_.add_argument("--csv", metavar="PATH", help="write the comparison rows")
    cmp_.set_defaults(func=cmd_compare)

    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("scenario", help=hint)
    val.set_defaults(func=cmd_validate)

    lst = sub.add_parser("list", help="list bundled scenarios")
    lst.set_defaults(func=cmd_list)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
