"""Command-line harness: run plans, build reports, replay archived
evaluations and serve the loopback bridge echo server.

Exit codes: 0 success, 1 usage error, 2 plan/semantic error, 3 backend
failure.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys

from .archive import ArchiveError, load_archive
from .bridge import BridgeEchoServer, IntegrityError, ProtocolError, TransportError
from .characteristics import DomainError
from .objectives import EvaluationContext
from .plan import PlanError, ReportError, parse_plan, report, run_plan
from .simulator import SimulationDiverged

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PLAN = 2
EXIT_BACKEND = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="vcsearch",
        description="Search for minimal vehicle-characteristic perturbations "
        "that degrade emergency-braking safety.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment plan")
    p_run.add_argument("plan", help="path to the plan INI file")
    p_run.add_argument("--parallel", type=int, default=1, metavar="K",
                       help="number of concurrent runs")
    p_run.add_argument("--seed-offset", type=int, default=0,
                       help="added to every seed in the plan")
    p_run.add_argument("--backend", default=None,
                       help="override plan backend: internal or external:HOST:PORT")
    p_run.add_argument("--output", default=None,
                       help="override the plan's output directory")

    p_report = sub.add_parser("report", help="build reports from archives")
    p_report.add_argument("archives", nargs="+",
                          help="archive files or glob patterns")
    p_report.add_argument("--th-safe", default="baseline",
                          help="unsafe threshold: 'baseline' or a number")
    p_report.add_argument("--output", default="report",
                          help="report output directory")

    p_replay = sub.add_parser("replay", help="re-simulate one archived evaluation")
    p_replay.add_argument("archive", help="archive file")
    p_replay.add_argument("index", type=int, help="evaluation index")

    p_echo = sub.add_parser("bridge-echo",
                            help="serve the loopback bridge test server")
    p_echo.add_argument("--host", default="127.0.0.1")
    p_echo.add_argument("--port", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    if args.parallel < 1:
        raise _UsageError("--parallel must be >= 1")
    plan = parse_plan(args.plan)
    if args.backend is not None:
        if args.backend != "internal" and not args.backend.startswith("external:"):
            raise PlanError(
                "--backend must be 'internal' or 'external:HOST:PORT'"
            )
        plan.backend = args.backend
    if args.output is not None:
        from pathlib import Path

        plan.output_dir = Path(args.output)
    result = run_plan(plan, parallel=args.parallel, seed_offset=args.seed_offset)
    for path in result.archive_paths:
        print(path)
    print(result.baseline_path)
    print(result.manifest_path)
    if result.failures:
        for (algorithm, seed), error in sorted(result.failures.items()):
            print(f"FAILED {algorithm} seed {seed}: {error}", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def _cmd_report(args) -> int:
    paths: list[str] = []
    for pattern in args.archives:
        matched = sorted(glob.glob(pattern))
        paths.extend(matched if matched else [pattern])
    th_safe: float | str = args.th_safe
    if th_safe != "baseline":
        try:
            th_safe = float(th_safe)
        except ValueError:
            raise _UsageError("--th-safe must be 'baseline' or a number")
    emitted = report(paths, th_safe=th_safe, output_dir=args.output)
    for name, path in sorted(emitted.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    loaded = load_archive(args.archive, allow_partial=True)
    records = loaded.archive.evaluations
    if not 0 <= args.index < len(records):
        raise ArchiveError(
            f"index {args.index} out of range (archive has {len(records)} evaluations)"
        )
    record = records[args.index]
    ctx = EvaluationContext(table=loaded.table, scenario=loaded.scenario)
    fresh = ctx.evaluate(record.raw, record.generation)
    match = fresh.trace_digest == record.trace_digest
    print(
        json.dumps(
            {
                "index": args.index,
                "raw": list(record.raw),
                "filtered": list(record.filtered),
                "objectives": list(fresh.objectives.as_tuple()),
                "archived_digest": record.trace_digest,
                "replayed_digest": fresh.trace_digest,
                "match": match,
            },
            indent=2,
        )
    )
    return EXIT_OK if match else EXIT_BACKEND


def _cmd_bridge_echo(args) -> int:
    server = BridgeEchoServer(args.host, args.port)
    print(f"bridge echo server listening on {server.endpoint}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "bridge-echo":
            return _cmd_bridge_echo(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PlanError, ReportError, ArchiveError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    except (TransportError, ProtocolError, IntegrityError, SimulationDiverged) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
