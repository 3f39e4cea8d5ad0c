"""The store-to-analysis-file pipeline used by the preprocess command.

Single-threaded it simply chains the staged operations. Parallel it
partitions raw rows by a stable hash of their session id into bucket files,
lets each worker transform, sort, group and JSON-encode its own sessions, and
merges the pre-encoded session blocks back into session-id order. Both paths
produce byte-identical files; worker count only changes wall time.
"""

from __future__ import annotations

import heapq
import json
import multiprocessing
import sys
import tempfile
import zlib
from pathlib import Path
from typing import Sequence

from whose.ingestion import LogStore
from whose.mapping_engine import (
    ActionInstance,
    AnalysisTable,
    ExtractionRule,
    MappingRule,
    _init_worker,
    _transform_lines,
    preprocess,
)
from whose.session_store import (
    ANALYSIS_FORMAT,
    ANALYSIS_VERSION,
    _dump,
    _session_block,
    build_sessions,
    persist,
)

_SID_KEY = '"session_id":"'


def _session_key(line: str) -> bytes:
    """The raw session-id spelling of a canonical store line, for bucketing."""
    start = line.find(_SID_KEY)
    if start >= 0:
        start += len(_SID_KEY)
        end = line.find('"', start)
        if end >= 0 and "\\" not in line[start:end]:
            return line[start:end].encode("utf-8")
    # escaped or oddly-shaped line: normalize through the JSON parser
    sid = json.loads(line)["session_id"]
    return json.dumps(sid, ensure_ascii=False)[1:-1].encode("utf-8")


def _encode_bucket(bucket_path: str) -> list[tuple[str, str]]:
    """Transform one bucket file into (session_id, encoded block) pairs,
    ordered by session id. Runs inside a worker with the rule state set up
    by the pool initializer."""
    with open(bucket_path, encoding="utf-8") as fh:
        tuples, users = _transform_lines(fh)
    tuples.sort()
    actions = [
        ActionInstance(
            session_id=sid,
            source_row_id=row_id,
            action_id=action_id,
            timestamp=ts,
            intra_row_index=intra,
            entities=entities if entities is not None else {},
            url=url,
        )
        for sid, ts, row_id, intra, action_id, url, entities in tuples
    ]
    table = AnalysisTable(actions=actions, session_users={s: u for s, (_, _, u) in users.items()})
    return [(s.session_id, _session_block(s)) for s in build_sessions(table)]


def _header(catalog: Sequence[dict]) -> str:
    return _dump(
        {
            "format": ANALYSIS_FORMAT,
            "version": ANALYSIS_VERSION,
            "catalog": [
                {"action_id": e["action_id"], "labels": e.get("labels", {})} for e in catalog
            ],
        }
    )


def preprocess_store_to_file(
    store: LogStore,
    mapping_rules: Sequence[MappingRule],
    extraction_rules: Sequence[ExtractionRule],
    out_path: str | Path,
    worker_count: int = 1,
    catalog: Sequence[dict] = (),
) -> tuple[int, int]:
    """Run the whole transform and write the analysis file.

    Returns (action_count, session_count).
    """
    if worker_count == 1 or sys.platform == "win32":
        table = preprocess(store, mapping_rules, extraction_rules, worker_count=1)
        sessions = build_sessions(table)
        persist(sessions, out_path, catalog=catalog)
        return len(table.actions), len(sessions)

    n_buckets = worker_count * 2
    actions_total = 0
    with tempfile.TemporaryDirectory(prefix="whose-buckets-") as tmp:
        bucket_paths = [Path(tmp) / f"bucket-{i:03d}.jsonl" for i in range(n_buckets)]
        handles = [open(p, "w", encoding="utf-8") for p in bucket_paths]
        try:
            for line in store.iter_raw_lines():
                handles[zlib.crc32(_session_key(line)) % n_buckets].write(line)
        finally:
            for fh in handles:
                fh.close()
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(
            processes=worker_count,
            initializer=_init_worker,
            initargs=(mapping_rules, extraction_rules),
        ) as pool:
            per_bucket = pool.map(_encode_bucket, [str(p) for p in bucket_paths])
    session_count = sum(len(blocks) for blocks in per_bucket)
    with open(out_path, "w", encoding="utf-8") as out:
        out.write(_header(catalog))
        for _, block in heapq.merge(*per_bucket):
            actions_total += block.count("\n") - 1
            out.write(block)
    return actions_total, session_count
