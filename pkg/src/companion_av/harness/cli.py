"""Command line entry point: ``companion-av run|validate|replay``.

Exit codes for ``run`` follow the terminal verdict (``runner.EXIT_CODES``).
Input problems use small codes that cannot collide with verdicts:
2 for an unreadable or invalid scenario, 3 for a malformed log,
4 when a replay diverges.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ..errors import LogFormatError, ScenarioParseError, ScenarioValidationError
from .runner import exit_code, replay, run
from .scenario import builtin_names, load_scenario

EXIT_BAD_SCENARIO = 2
EXIT_BAD_LOG = 3
EXIT_DIVERGED = 4

log = logging.getLogger("companion_av")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="companion-av", description="Deterministic companion-vehicle simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and print the verdict")
    r.add_argument("scenario", help="scenario file, or builtin:NAME")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--until", type=float, default=None, metavar="S", help="stop after S simulated seconds")
    r.add_argument("--log", type=Path, default=None, metavar="PATH", help="write the event log here")
    r.add_argument("--alerts", type=Path, default=None, metavar="PATH",
                   help="write control-room messages here, one per line")

    v = sub.add_parser("validate", help="parse and validate a scenario without running it")
    v.add_argument("scenario")

    rp = sub.add_parser("replay", help="re-run the scenario behind a log and diff the records")
    rp.add_argument("log", type=Path)
    rp.add_argument("--scenario", default=None, help="use this scenario instead of the one named in the header")

    sub.add_parser("list", help="list the bundled scenarios")
    return p


def _load(ref: str):
    try:
        return load_scenario(ref)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
    return None


def _cmd_run(args) -> int:
    spec = _load(args.scenario)
    if spec is None:
        return EXIT_BAD_SCENARIO
    log.info("running %s (seed %s)", spec.name, spec.seed if args.seed is None else args.seed)
    result = run(spec, seed=args.seed, until=args.until)
    if args.log is not None:
        result.write(args.log)
        log.info("wrote %d records to %s", len(result.records), args.log)
    if args.alerts is not None:
        args.alerts.write_text("".join(a + "\n" for a in result.alerts))
    print(json.dumps(result.verdict, sort_keys=True))
    return exit_code(result)


def _cmd_validate(args) -> int:
    spec = _load(args.scenario)
    if spec is None:
        return EXIT_BAD_SCENARIO
    print(f"ok: {spec.name} ({len(spec.map.nodes)} nodes, {len(spec.events)} events, "
          f"{len(spec.disturbances)} disturbances, horizon {spec.horizon:g} s)")
    return 0


def _cmd_replay(args) -> int:
    try:
        report = replay(args.log, args.scenario)
    except LogFormatError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_BAD_LOG
    print(report.describe())
    if not report.identical:
        print(f"  expected: {report.expected}")
        print(f"  actual:   {report.actual}")
        return EXIT_DIVERGED
    return 0


def _cmd_list(args) -> int:
    for name in builtin_names():
        print(f"builtin:{name}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"run": _cmd_run, "validate": _cmd_validate, "replay": _cmd_replay, "list": _cmd_list}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
