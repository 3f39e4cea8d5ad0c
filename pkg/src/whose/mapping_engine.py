"""Rule tables mapping raw URL/referrer strings to typed actions, and the
row-to-action transform that runs them over a whole store, in parallel,
deterministically.

Rules use Python's regex dialect and match anywhere in the string unless the
pattern anchors itself. Every row yields at least one action: rows no rule
matches become the ``__unmatched__`` sentinel so coverage stays measurable.
"""

from __future__ import annotations

import csv
import multiprocessing
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import unquote

from whose.ingestion import LogRow, LogStore, row_from_json_line

UNMATCHED_ACTION = "__unmatched__"
WILDCARD_ACTION = "*"

MAPPING_COLUMNS = ["rule_order", "action_id", "label_en", "label_de", "referrer_param", "url_param"]
EXTRACTION_COLUMNS = ["action_id", "entity_name", "kind", "source", "pattern"]

_ROW_FIELDS = ("row_id", "session_id", "user_id", "timestamp", "resultlist_ids", "url", "referrer_url")
_TEXT_SOURCES = ("url", "referrer_url")


class RuleLoadError(Exception):
    """A rule table failed to load; loading is all-or-nothing."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(f"{message} @ row {row}" if row is not None else message)
        self.row = row


@dataclass
class MappingRule:
    rule_order: int
    action_id: str
    labels: dict[str, str]
    url_pattern: str
    referrer_pattern: str | None
    url_re: re.Pattern = field(repr=False, compare=False, default=None)
    referrer_re: re.Pattern | None = field(repr=False, compare=False, default=None)


@dataclass
class ExtractionRule:
    action_id: str  # concrete action id, or "*" for all actions
    entity_name: str
    kind: str  # "text" | "field"
    source: str
    pattern: str | None = None
    pattern_re: re.Pattern | None = field(repr=False, compare=False, default=None)


@dataclass(slots=True)
class ActionInstance:
    """One typed user action derived from a log row.

    step_index and duration_ms are filled in when sessions are built. The raw
    url is kept alongside the extracted entities so text filters and the
    session detail view can fall back to it.
    """

    session_id: str
    source_row_id: int
    action_id: str
    timestamp: int  # UTC epoch milliseconds
    intra_row_index: int
    step_index: int = 0
    duration_ms: int | None = None
    entities: dict[str, list[str]] = field(default_factory=dict)
    url: str = ""


@dataclass
class AnalysisTable:
    """Canonically ordered actions plus per-session user resolution.

    actions are sorted by (session_id, timestamp, source_row_id,
    intra_row_index); session_users maps session_id to the first non-empty
    user id seen in that session's rows, chronologically.
    """

    actions: list[ActionInstance]
    session_users: dict[str, str] = field(default_factory=dict)


def _compile(pattern: str, row: int, column: str) -> re.Pattern:
    try:
        return re.compile(pattern)
    except re.error as exc:
        raise RuleLoadError(f"bad_pattern in {column} ({exc})", row) from None


def _read_rule_csv(path: str | Path, expected_columns: list[str]) -> Iterator[tuple[int, dict[str, str]]]:
    try:
        fh = open(path, encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise RuleLoadError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise RuleLoadError(f"{path}: empty file, expected header {','.join(expected_columns)}")
        if [h.strip() for h in header] != expected_columns:
            raise RuleLoadError(
                f"{path}: bad header {','.join(header)!r}, expected {','.join(expected_columns)!r}"
            )
        for row_num, record in enumerate((r for r in reader if r), start=1):
            if len(record) != len(expected_columns):
                raise RuleLoadError("wrong number of columns", row_num)
            yield row_num, dict(zip(expected_columns, record))


def load_mapping_table(path: str | Path) -> list[MappingRule]:
    """Load mapping rules from CSV, in file order (rule_order = 0, 1, 2, ...).

    The file's rule_order column is informational for spreadsheet editing;
    application order is the file order.
    """
    rules: list[MappingRule] = []
    for row_num, rec in _read_rule_csv(path, MAPPING_COLUMNS):
        action_id = rec["action_id"].strip()
        if not action_id:
            raise RuleLoadError("empty_action_id", row_num)
        labels = {}
        if rec["label_en"].strip():
            labels["en"] = rec["label_en"].strip()
        if rec["label_de"].strip():
            labels["de"] = rec["label_de"].strip()
        if not labels:
            raise RuleLoadError("missing_label (need label_en or label_de)", row_num)
        url_pattern = rec["url_param"]
        if not url_pattern:
            raise RuleLoadError("empty url_param", row_num)
        referrer_pattern = rec["referrer_param"] or None
        rule = MappingRule(
            rule_order=len(rules),
            action_id=action_id,
            labels=labels,
            url_pattern=url_pattern,
            referrer_pattern=referrer_pattern,
            url_re=_compile(url_pattern, row_num, "url_param"),
            referrer_re=_compile(referrer_pattern, row_num, "referrer_param")
            if referrer_pattern
            else None,
        )
        rules.append(rule)
    return rules


def load_extraction_table(path: str | Path) -> list[ExtractionRule]:
    rules: list[ExtractionRule] = []
    for row_num, rec in _read_rule_csv(path, EXTRACTION_COLUMNS):
        action_id = rec["action_id"].strip()
        if not action_id:
            raise RuleLoadError("empty_action_id", row_num)
        entity_name = rec["entity_name"].strip()
        if not entity_name:
            raise RuleLoadError("empty_entity_name", row_num)
        kind = rec["kind"].strip()
        source = rec["source"].strip()
        pattern = rec["pattern"]
        if kind == "text":
            if source not in _TEXT_SOURCES:
                raise RuleLoadError(f"bad_source {source!r} (text rules read url or referrer_url)", row_num)
            if not pattern:
                raise RuleLoadError("pattern_needs_one_group (pattern missing)", row_num)
            compiled = _compile(pattern, row_num, "pattern")
            if compiled.groups != 1:
                raise RuleLoadError("pattern_needs_one_group", row_num)
            rules.append(ExtractionRule(action_id, entity_name, kind, source, pattern, compiled))
        elif kind == "field":
            if pattern:
                raise RuleLoadError("unexpected_pattern (field rules copy verbatim)", row_num)
            if source not in _ROW_FIELDS:
                raise RuleLoadError(f"bad_source {source!r} (not a log row field)", row_num)
            rules.append(ExtractionRule(action_id, entity_name, kind, source))
        else:
            raise RuleLoadError(f"bad_kind {kind!r} (expected text or field)", row_num)
    return rules


def action_catalog(rules: Sequence[MappingRule]) -> list[dict]:
    """Distinct actions of a mapping table in first-occurrence order."""
    seen: dict[str, dict] = {}
    for rule in rules:
        if rule.action_id not in seen:
            seen[rule.action_id] = {"action_id": rule.action_id, "labels": dict(rule.labels)}
    return list(seen.values())


def match_row(row: LogRow, rules: Sequence[MappingRule]) -> list[str]:
    """action_ids of all rules matching the row, in rule order.

    A rule matches when its url pattern is found in row.url and, if it has a
    referrer pattern, that is found in row.referrer_url. No match yields the
    ``__unmatched__`` sentinel alone.
    """
    url = row.url
    referrer = row.referrer_url
    out = [
        r.action_id
        for r in rules
        if r.url_re.search(url) and (r.referrer_re is None or r.referrer_re.search(referrer))
    ]
    return out or [UNMATCHED_ACTION]


def extract_entities(
    row: LogRow,
    action_id: str,
    extraction_rules: Sequence[ExtractionRule],
) -> dict[str, list[str]]:
    """Entity values for one (row, action) pair.

    text rules collect every non-overlapping capture-group match from the
    source string, percent-decoded; field rules copy the row field verbatim.
    Unmatched sentinel actions only get wildcard field rules. Rules that find
    nothing contribute nothing.
    """
    entities: dict[str, list[str]] = {}
    unmatched = action_id == UNMATCHED_ACTION
    for rule in extraction_rules:
        if unmatched:
            if rule.kind != "field" or rule.action_id != WILDCARD_ACTION:
                continue
        elif rule.action_id != WILDCARD_ACTION and rule.action_id != action_id:
            continue
        if rule.kind == "text":
            source = row.url if rule.source == "url" else row.referrer_url
            values = [unquote(g) for m in rule.pattern_re.finditer(source) if (g := m.group(1)) is not None]
        else:
            raw = getattr(row, rule.source)
            if raw is None or raw == "":
                values = []
            elif isinstance(raw, list):
                values = [str(v) for v in raw]
            else:
                values = [str(raw)]
        if values:
            entities.setdefault(rule.entity_name, []).extend(values)
    return entities


def row_to_actions(
    row: LogRow,
    mapping_rules: Sequence[MappingRule],
    extraction_rules: Sequence[ExtractionRule],
) -> list[ActionInstance]:
    """The per-row transform: match, then extract, one instance per match."""
    return [
        ActionInstance(
            session_id=row.session_id,
            source_row_id=row.row_id,
            action_id=action_id,
            timestamp=row.timestamp,
            intra_row_index=i,
            entities=extract_entities(row, action_id, extraction_rules),
            url=row.url,
        )
        for i, action_id in enumerate(match_row(row, mapping_rules))
    ]


# ---------------------------------------------------------------------------
# Parallel preprocessing.
#
# Rows are independent (rules hold no cross-row state), so the store file is
# split at line boundaries into byte ranges that worker processes read and
# transform on their own; per-range results are merged in range order, then
# the whole table is sorted into its canonical order. The output is a pure
# function of (store contents, rule tables): worker count only changes wall
# time.
# ---------------------------------------------------------------------------

_CHUNK_LINES = 2_000

# (session_id, timestamp, row_id, intra_row_index, action_id, url, entities|None)
_ActionTuple = tuple[str, int, int, int, str, str, dict | None]

_worker_state: tuple | None = None


def _init_worker(mapping_rules, extraction_rules, rows_path=None) -> None:
    global _worker_state
    # pre-bound search callables keep the per-row rule loop free of attribute
    # lookups; the extraction table is narrowed per action id on first use
    fast_rules = [
        (r.url_re.search, r.referrer_re.search if r.referrer_re else None, r.action_id)
        for r in mapping_rules
    ]
    _worker_state = (fast_rules, tuple(extraction_rules), {}, rows_path)


def _extraction_subset(action_id: str) -> tuple[ExtractionRule, ...]:
    _, extraction_rules, cache, _ = _worker_state
    subset = cache.get(action_id)
    if subset is None:
        if action_id == UNMATCHED_ACTION:
            subset = tuple(
                r for r in extraction_rules if r.kind == "field" and r.action_id == WILDCARD_ACTION
            )
        else:
            subset = tuple(
                r for r in extraction_rules if r.action_id in (WILDCARD_ACTION, action_id)
            )
        cache[action_id] = subset
    return subset


def _transform_lines(lines: Iterable[str]) -> tuple[list[_ActionTuple], dict[str, tuple[int, int, str]]]:
    fast_rules, _, _, _ = _worker_state
    actions: list[_ActionTuple] = []
    append = actions.append
    users: dict[str, tuple[int, int, str]] = {}
    sentinel = (UNMATCHED_ACTION,)
    for line in lines:
        row = row_from_json_line(line)
        url = row.url
        referrer = row.referrer_url
        hits = [
            action_id
            for url_search, ref_search, action_id in fast_rules
            if url_search(url) and (ref_search is None or ref_search(referrer))
        ] or sentinel
        for i, action_id in enumerate(hits):
            subset = _extraction_subset(action_id)
            entities = extract_entities(row, action_id, subset) if subset else None
            append((row.session_id, row.timestamp, row.row_id, i, action_id, url, entities or None))
        if row.user_id:
            key = (row.timestamp, row.row_id)
            prev = users.get(row.session_id)
            if prev is None or key < prev[:2]:
                users[row.session_id] = (row.timestamp, row.row_id, row.user_id)
    return actions, users


def _transform_range(byte_range: tuple[int, int]):
    start, end = byte_range
    rows_path = _worker_state[3]
    with open(rows_path, "rb") as fh:
        fh.seek(start)
        data = fh.read(end - start)
    return _transform_lines(data.decode("utf-8").splitlines())


def _line_aligned_ranges(path, chunk_bytes: int) -> list[tuple[int, int]]:
    """Split the file into chunks that start and end on line boundaries."""
    size = path.stat().st_size
    if size == 0:
        return []
    boundaries = [0]
    with open(path, "rb") as fh:
        pos = chunk_bytes
        while pos < size:
            fh.seek(pos)
            fh.readline()
            boundary = fh.tell()
            if boundary >= size:
                break
            boundaries.append(boundary)
            pos = boundary + chunk_bytes
    boundaries.append(size)
    return list(zip(boundaries, boundaries[1:]))


def _merge_users(into: dict[str, tuple[int, int, str]], part: dict[str, tuple[int, int, str]]) -> None:
    for sid, cand in part.items():
        prev = into.get(sid)
        if prev is None or cand[:2] < prev[:2]:
            into[sid] = cand


def preprocess(
    store: LogStore,
    mapping_rules: Sequence[MappingRule],
    extraction_rules: Sequence[ExtractionRule],
    worker_count: int = 1,
    chunk_lines: int = _CHUNK_LINES,
) -> AnalysisTable:
    """Transform every stored row into typed actions, canonically ordered.

    Output is bit-identical for any worker_count. Workers are separate
    processes; each parses and matches its own slice of raw store lines.
    """
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    tuples: list[_ActionTuple] = []
    users: dict[str, tuple[int, int, str]] = {}
    size = store.rows_path.stat().st_size if store.rows_path.exists() else 0
    if worker_count == 1 or size == 0:
        _init_worker(mapping_rules, extraction_rules)
        tuples, users = _transform_lines(store.iter_raw_lines())
    else:
        # approximate the requested lines-per-chunk in bytes so workers can
        # read their own slice of the file instead of receiving it pickled
        avg_line = max(1, size // max(1, len(store)))
        ranges = _line_aligned_ranges(store.rows_path, max(4096, chunk_lines * avg_line))
        ctx = multiprocessing.get_context("fork" if sys.platform != "win32" else "spawn")
        with ctx.Pool(
            processes=worker_count,
            initializer=_init_worker,
            initargs=(mapping_rules, extraction_rules, store.rows_path),
        ) as pool:
            for part_actions, part_users in pool.imap(_transform_range, ranges):
                tuples.extend(part_actions)
                _merge_users(users, part_users)
    # Tuple layout starts with the canonical sort key, and (session_id,
    # timestamp, row_id, intra) is unique, so a bare sort never compares the
    # trailing dict.
    tuples.sort()
    intern = sys.intern
    actions = [
        ActionInstance(
            session_id=intern(sid),
            source_row_id=row_id,
            action_id=intern(action_id),
            timestamp=ts,
            intra_row_index=intra,
            entities=entities if entities is not None else {},
            url=url,
        )
        for sid, ts, row_id, intra, action_id, url, entities in tuples
    ]
    return AnalysisTable(actions=actions, session_users={sid: u for sid, (_, _, u) in users.items()})


def rule_match_counts(
    rows: Iterable[LogRow],
    rules: Sequence[MappingRule],
) -> tuple[list[int], int, int]:
    """Per-rule match counts over a sample, plus (matched_rows, total_rows)."""
    counts = [0] * len(rules)
    matched_rows = 0
    total = 0
    for row in rows:
        total += 1
        any_hit = False
        for idx, rule in enumerate(rules):
            if rule.url_re.search(row.url) and (
                rule.referrer_re is None or rule.referrer_re.search(row.referrer_url)
            ):
                counts[idx] += 1
                any_hit = True
        if any_hit:
            matched_rows += 1
    return counts, matched_rows, total
