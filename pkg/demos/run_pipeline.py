#!/usr/bin/env python3
"""End-to-end walkthrough on generated data: write a raw CSV log, ingest it,
validate the rule tables, preprocess into an analysis file, then answer a few
questions straight from the library. Run from the repo root:

    python demos/run_pipeline.py [workdir]
"""

from __future__ import annotations

import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from whose.cli import main as whose
from whose.filter_engine import FilterSpec, apply_filters
from whose.flow_aggregator import aggregate
from whose.session_store import SessionStore
from whose.synthetic import generate_demo_rows, write_extraction_csv, write_mapping_csv


def write_raw_log(path: Path, n_sessions: int) -> int:
    """Rows as a web server would have logged them: CSV, ISO timestamps."""
    rows = generate_demo_rows(n_sessions, seed=2014)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["session_id", "user_id", "timestamp", "resultlist_ids", "url", "referrer_url"])
        for r in rows:
            ts = datetime.fromtimestamp(r.timestamp / 1000, tz=timezone.utc)
            writer.writerow(
                [
                    r.session_id,
                    r.user_id or "",
                    ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z",
                    ",".join(r.resultlist_ids),
                    r.url,
                    r.referrer_url,
                ]
            )
    return len(rows)


def run(cmd: list[str]) -> None:
    print(f"\n$ whose {' '.join(cmd)}")
    code = whose(cmd)
    if code != 0:
        sys.exit(code)


def main() -> None:
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demos/out")
    work.mkdir(parents=True, exist_ok=True)

    log = work / "portal_access.csv"
    n = write_raw_log(log, n_sessions=400)
    print(f"generated {n} raw log rows for 400 sessions -> {log}")

    schema = work / "schema.json"
    schema.write_text(
        json.dumps(
            {
                "columns": {
                    "session_id": "session_id",
                    "user_id": "user_id",
                    "timestamp": "timestamp",
                    "resultlist_ids": "resultlist_ids",
                    "url": "url",
                    "referrer_url": "referrer_url",
                },
                "timestamp_format": "iso8601",
            },
            indent=2,
        )
    )
    mapping = work / "mapping.csv"
    extraction = work / "extraction.csv"
    write_mapping_csv(mapping)
    write_extraction_csv(extraction)

    store = work / "rows"
    analysis = work / "analysis.jsonl"
    run(["ingest", "--log", str(log), "--format", "csv", "--schema", str(schema), "--store", str(store)])
    run(["validate-mapping", "--mapping", str(mapping), "--extraction", str(extraction), "--sample", str(store)])
    run(["preprocess", "--store", str(store), "--mapping", str(mapping), "--extraction", str(extraction), "--threads", "4", "--out", str(analysis)])
    run(["export-flow", "--store", str(analysis), "--filter", '{"logged_in_only": true}', "--out", str(work / "flow_logged_in.json")])

    # the same data through the library surface
    loaded = SessionStore.load(analysis)
    print(f"\nloaded {len(loaded)} sessions")

    dwellers = apply_filters(
        loaded.sessions,
        FilterSpec(action_duration_action_id="view_record", action_duration_min_ms=30_000),
        (None, None),
    )
    print(f"sessions with a record viewed >= 30s: {len(dwellers)}")

    flow = aggregate(loaded.sessions, max_steps=8)
    print("\ntop actions by occurrence in the first 8 steps:")
    for action_id in flow.action_order[:6]:
        total = sum(c for (step, a), c in flow.nodes.items() if a == action_id)
        starts = flow.nodes.get((1, action_id), 0)
        print(f"  {action_id:<22} {total:>5} occurrences, {starts:>4} sessions start here")

    print(f"\nnext: whose serve --store {analysis} --port 8080 --ui-dir frontend/dist")


if __name__ == "__main__":
    main()
