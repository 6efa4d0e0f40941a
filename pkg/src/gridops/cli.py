"""Operator command line: serving, ingestion, reporting, fixtures.

The CLI embeds the same core the HTTP service runs, operating store-direct
against the configured data directory, so offline reports are identical to
API responses over the same state. File arguments accept '-' for stdin.

Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path

from . import accounting, fixtures
from .config import load_config
from .errors import GridOpsError
from .service import GridOps
from .timeutil import parse_ts


def _read_arg_file(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write_arg_file(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(path).write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to the TOML config file")

    parser = argparse.ArgumentParser(prog="gridops", parents=[common],
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    serve = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)

    topology = sub.add_parser("topology", parents=[common], help="import/export topology")
    topo_sub = topology.add_subparsers(dest="topology_cmd", required=True)
    timp = topo_sub.add_parser("import", parents=[common])
    timp.add_argument("file", help="topology snapshot JSON ('-' for stdin)")
    texp = topo_sub.add_parser("export", parents=[common])
    texp.add_argument("file", help="output path ('-' for stdout)")
    texp.add_argument("--scope", default=None)

    ingest = sub.add_parser("ingest", parents=[common], help="ingest probe results or batch logs")
    ingest_sub = ingest.add_subparsers(dest="ingest_cmd", required=True)
    ires = ingest_sub.add_parser("results", parents=[common])
    ires.add_argument("file", help="JSON-lines probe results ('-' for stdin)")
    ires.add_argument("--actor", default="cli:local")
    iacc = ingest_sub.add_parser("accounting", parents=[common])
    iacc.add_argument("file", help="batch server log ('-' for stdin)")
    iacc.add_argument("--site", required=True, help="site node id the log belongs to")
    iacc.add_argument("--actor", default="cli:local")

    report = sub.add_parser("report", parents=[common], help="availability and usage reports")
    report_sub = report.add_subparsers(dest="report_cmd", required=True)
    ravail = report_sub.add_parser("availability", parents=[common])
    ravail.add_argument("--quarter", type=int)
    ravail.add_argument("--from", dest="from_ts")
    ravail.add_argument("--to", dest="to_ts")
    ravail.add_argument("--scope", default=None)
    ravail.add_argument("--format", choices=("json", "csv"), default="json")
    rusage = report_sub.add_parser("usage", parents=[common])
    rusage.add_argument("--rows", required=True)
    rusage.add_argument("--cols", required=True)
    rusage.add_argument("--metric", required=True)
    rusage.add_argument("--vo")
    rusage.add_argument("--country")
    rusage.add_argument("--site")
    rusage.add_argument("--from", dest="from_ts")
    rusage.add_argument("--to", dest="to_ts")
    rusage.add_argument("--job-type", dest="job_type")
    rusage.add_argument("--format", choices=("json", "xml"), default="json")

    good = sub.add_parser("good", parents=[common], help="operator-on-duty rotation")
    good_sub = good.add_subparsers(dest="good_cmd", required=True)
    gcur = good_sub.add_parser("current", parents=[common])
    gcur.add_argument("--date", dest="date_", help="ISO date, default today")

    ticket = sub.add_parser("ticket", parents=[common], help="trouble-ticket workflow")
    ticket_sub = ticket.add_subparsers(dest="ticket_cmd", required=True)
    topen = ticket_sub.add_parser("open", parents=[common])
    topen.add_argument("--site", required=True)
    topen.add_argument("--severity", default="SIMPLE", choices=("SIMPLE", "COMPLEX"))
    topen.add_argument("--summary", required=True)
    topen.add_argument("--actor", required=True, help="subject DN of the opener")
    topen.add_argument("--evidence", help="JSON file with evidence refs ('-' for stdin)")
    tlist = ticket_sub.add_parser("list", parents=[common])
    tlist.add_argument("--state")
    ttrans = ticket_sub.add_parser("transition", parents=[common])
    ttrans.add_argument("ticket_id")
    ttrans.add_argument("state")
    ttrans.add_argument("--note", default="")
    ttrans.add_argument("--actor", required=True, help="subject DN of the acting contact")

    fix = sub.add_parser("fixtures", parents=[common], help="generate fixture corpora")
    fix_sub = fix.add_subparsers(dest="fixtures_cmd", required=True)
    fgen = fix_sub.add_parser("generate", parents=[common])
    fgen.add_argument("--profile", required=True, choices=fixtures.PROFILES)
    fgen.add_argument("--out", default="fixtures-out")
    fgen.add_argument(
        "--seed-store",
        action="store_true",
        help="also load the inventory registry, contacts and rota into the store",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _dispatch(args)
    except GridOpsError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - contract: internal errors exit 2
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.command == "serve":
        return _cmd_serve(args, config)

    ops = GridOps(config)
    try:
        if args.command == "topology":
            if args.topology_cmd == "import":
                count = ops.import_topology_document(_read_arg_file(args.file))
                print(f"imported {count} nodes (version {ops.registry.version})")
            else:
                _write_arg_file(args.file, ops.topology_document(args.scope))
        elif args.command == "ingest":
            if args.ingest_cmd == "results":
                outcome = ops.ingest_results_text(_read_arg_file(args.file), actor=args.actor)
                print(f"{outcome['received']} results, {outcome['appended']} new")
            else:
                outcome = ops.ingest_accounting(
                    args.site, _read_arg_file(args.file), actor=args.actor
                )
                print(f"{outcome['records']} records, {outcome['errors']} errors")
        elif args.command == "report":
            _cmd_report(args, ops)
        elif args.command == "good":
            day = date.fromisoformat(args.date_) if args.date_ else None
            print(ops.good_current(day)["country"])
        elif args.command == "ticket":
            _cmd_ticket(args, ops)
        elif args.command == "fixtures":
            written = fixtures.write_profile(args.profile, args.out)
            for path in written:
                print(path)
            if args.seed_store:
                ops.seed_inventory()
                print("store seeded with inventory registry, contacts and rota")
        else:
            raise ValueError(f"unknown command {args.command!r}")
    finally:
        ops.close()
    return 0


def _cmd_report(args: argparse.Namespace, ops: GridOps) -> None:
    if args.report_cmd == "availability":
        if args.quarter is not None:
            report = ops.quarterly_report(args.quarter)
        elif args.from_ts and args.to_ts:
            report = ops.window_report((parse_ts(args.from_ts), parse_ts(args.to_ts)))
        else:
            raise ValueError("availability report needs --quarter or --from/--to")
        print(report.to_csv() if args.format == "csv" else report.to_json())
    else:
        window = None
        if args.from_ts and args.to_ts:
            window = (parse_ts(args.from_ts), parse_ts(args.to_ts))
        table = ops.usage_table(
            args.rows, args.cols, args.metric,
            vo=args.vo, country=args.country, site=args.site,
            window=window, job_type=args.job_type,
        )
        if args.format == "xml":
            print(accounting.export_xml(table))
        else:
            print(json.dumps(table.to_dict(), indent=2, sort_keys=True))


def _cmd_ticket(args: argparse.Namespace, ops: GridOps) -> None:
    if args.ticket_cmd == "open":
        evidence = json.loads(_read_arg_file(args.evidence)) if args.evidence else []
        ticket = ops.open_ticket(
            args.actor, args.site, args.severity, args.summary, evidence
        )
        print(json.dumps(ticket.to_dict(), indent=2))
    elif args.ticket_cmd == "list":
        print(json.dumps(ops.list_tickets(args.state), indent=2))
    else:
        ticket = ops.transition_ticket(args.actor, args.ticket_id, args.state, args.note)
        print(json.dumps(ticket.to_dict(), indent=2))


def _cmd_serve(args: argparse.Namespace, config) -> int:
    import uvicorn

    from .api import create_app

    if args.host:
        config.server.listen_host = args.host
    if args.port:
        config.server.listen_port = args.port
    ops = GridOps(config)
    app = create_app(ops)
    try:
        uvicorn.run(
            app,
            host=config.server.listen_host,
            port=config.server.listen_port,
            ssl_certfile=config.server.tls_cert,
            ssl_keyfile=config.server.tls_key,
            log_level="info",
        )
    finally:
        ops.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
