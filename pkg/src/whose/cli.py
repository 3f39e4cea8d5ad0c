"""Operator entry points: ingest, validate-mapping, preprocess, serve, export-flow.

The pipeline is staged through files: logs go into a row store, preprocessing
writes an analysis file, the server and exporter read that file. Exit codes
are scriptable: 0 success, 1 user/config error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from pathlib import Path

from whose.filter_engine import (
    FilterValidationError,
    apply_filters,
    filter_spec_from_json,
    resolve_time_range,
    time_range_from_json,
)
from whose.flow_aggregator import DEFAULT_MAX_STEPS, aggregate, encode_flow
from whose.ingestion import IngestError, LogStore, SchemaConfig, ingest_file, row_from_json_line
from whose.mapping_engine import (
    RuleLoadError,
    action_catalog,
    load_extraction_table,
    load_mapping_table,
    rule_match_counts,
)
from whose.session_store import AnalysisFormatError, SessionStore

ENV_PORT = "WHOSE_PORT"
ENV_STORE = "WHOSE_STORE"
DEFAULT_PORT = 8080


class CliError(Exception):
    """User/config error: reported on stderr, exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; bad flags are a user error here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="whose", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="append a raw log file to a row store")
    p.add_argument("--log", required=True, help="log file to read")
    p.add_argument("--format", required=True, choices=["csv", "jsonl"])
    p.add_argument("--schema", required=True, help="schema config (JSON)")
    p.add_argument("--store", required=True, help="row store directory (created if missing)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("validate-mapping", help="compile rule tables, optionally score coverage")
    p.add_argument("--mapping", required=True)
    p.add_argument("--extraction", required=True)
    p.add_argument("--sample", help="row store directory (or rows.jsonl) to score rules against")
    p.set_defaults(func=cmd_validate_mapping)

    p = sub.add_parser("preprocess", help="transform a row store into an analysis file")
    p.add_argument("--store", required=True, help="row store directory")
    p.add_argument("--mapping", required=True)
    p.add_argument("--extraction", required=True)
    p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--out", required=True, help="analysis file to write")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("serve", help="serve the HTTP API over an analysis file")
    p.add_argument("--store", help=f"analysis file (or ${ENV_STORE})")
    p.add_argument("--port", type=int, help=f"listen port (or ${ENV_PORT}; default {DEFAULT_PORT})")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", help="serve these static assets at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-flow", help="write the flow aggregate for a filter, as the API would")
    p.add_argument("--store", required=True, help="analysis file")
    p.add_argument("--filter", default="{}", help="filter spec JSON")
    p.add_argument("--time-range", default='{"preset":"all"}', help="time range JSON")
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_flow)

    return parser


def cmd_ingest(args) -> int:
    schema = SchemaConfig.load(args.schema)
    store = LogStore(args.store)
    report = ingest_file(args.log, args.format, schema, store)
    print(f"accepted: {report.accepted_count}")
    print(f"rejected: {report.rejected_count}")
    for locator, reason in report.rejections:
        print(f"  {locator}: {reason}")
    return 0


def _sample_rows(sample: str):
    path = Path(sample)
    if path.is_dir():
        return list(LogStore(path, create=False).iter_rows())
    try:
        with open(path, encoding="utf-8") as fh:
            return [row_from_json_line(line) for line in fh if line.strip()]
    except OSError as exc:
        raise CliError(f"cannot read sample {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"sample {path} is not canonical row JSONL: {exc}") from exc


def cmd_validate_mapping(args) -> int:
    mapping_rules = load_mapping_table(args.mapping)
    extraction_rules = load_extraction_table(args.extraction)
    print(f"mapping rules: {len(mapping_rules)} compiled")
    print(f"extraction rules: {len(extraction_rules)} compiled")
    if args.sample:
        rows = _sample_rows(args.sample)
        counts, matched, total = rule_match_counts(rows, mapping_rules)
        for rule, count in zip(mapping_rules, counts):
            print(f"rule {rule.rule_order} {rule.action_id}: {count} matches")
        coverage = (matched / total * 100.0) if total else 0.0
        print(f"coverage: {coverage:.1f}% ({matched}/{total} rows matched)")
    return 0


def cmd_preprocess(args) -> int:
    if args.threads < 1:
        raise CliError("--threads must be >= 1")
    from whose.pipeline import preprocess_store_to_file

    store = LogStore(args.store, create=False)
    mapping_rules = load_mapping_table(args.mapping)
    extraction_rules = load_extraction_table(args.extraction)
    started = time.perf_counter()
    action_count, session_count = preprocess_store_to_file(
        store,
        mapping_rules,
        extraction_rules,
        args.out,
        worker_count=args.threads,
        catalog=action_catalog(mapping_rules),
    )
    elapsed = time.perf_counter() - started
    rate = len(store) / elapsed if elapsed > 0 else float("inf")
    print(f"rows: {len(store)}")
    print(f"actions: {action_count}")
    print(f"sessions: {session_count}")
    print(f"rows/sec: {rate:.0f}")
    return 0


def cmd_serve(args) -> int:
    import signal

    import uvicorn

    from whose.api_service import create_app

    store_path = args.store or os.environ.get(ENV_STORE)
    if not store_path:
        raise CliError(f"no analysis file: pass --store or set ${ENV_STORE}")
    if args.port is not None:
        port = args.port
    else:
        try:
            port = int(os.environ.get(ENV_PORT, DEFAULT_PORT))
        except ValueError:
            raise CliError(f"${ENV_PORT} must be an integer") from None
    ui_dir = args.ui_dir
    if ui_dir and not Path(ui_dir).is_dir():
        raise CliError(f"--ui-dir {ui_dir} is not a directory")
    store = SessionStore.load(store_path)
    print(f"loaded {len(store)} sessions from {store_path}", flush=True)
    app = create_app(store, ui_dir=ui_dir)
    # uvicorn re-raises a caught SIGTERM after its graceful shutdown; absorb
    # it so a supervisor-initiated stop exits 0.
    signal.signal(signal.SIGTERM, lambda *_: None)
    try:
        uvicorn.run(app, host=args.host, port=port, log_level="warning")
    except KeyboardInterrupt:
        pass
    return 0


def cmd_export_flow(args) -> int:
    if args.max_steps < 1:
        raise CliError("--max-steps must be >= 1")
    try:
        filter_obj = json.loads(args.filter)
        range_obj = json.loads(args.time_range)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON argument: {exc}") from exc
    spec = filter_spec_from_json(filter_obj)
    time_range = time_range_from_json(range_obj)
    store = SessionStore.load(args.store)
    bounds = resolve_time_range(time_range, fallback_now=int(time.time() * 1000))
    flow = aggregate(apply_filters(store.sessions, spec, bounds), args.max_steps)
    with open(args.out, "wb") as fh:
        fh.write(encode_flow(flow))
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CliError, IngestError, RuleLoadError, AnalysisFormatError, FilterValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
