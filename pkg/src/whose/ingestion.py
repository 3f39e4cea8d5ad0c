"""Normalize uncontrolled interaction logs (CSV / JSON Lines) into a canonical row store.

The row schema is deliberately minimal: session id, optional user id, UTC
timestamp, logged result-list ids, the requested URL and its referrer.
Everything the source system encodes beyond that stays inside the URL strings
and is recovered later by the mapping rules.
"""

from __future__ import annotations

import csv
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterator, Mapping, Sequence
from zoneinfo import ZoneInfo

STORE_FORMAT = "whose-store"
STORE_VERSION = 1

# Machine-readable per-record rejection reasons.
REJECT_MISSING_SESSION_ID = "missing_session_id"
REJECT_BAD_TIMESTAMP = "bad_timestamp"
REJECT_WRONG_ARITY = "wrong_arity"
REJECT_INVALID_JSON = "invalid_json"

#: Canonical row fields fed by the source log (row_id is assigned at ingest).
SOURCE_FIELDS = ("session_id", "user_id", "timestamp", "resultlist_ids", "url", "referrer_url")
_REQUIRED_FIELDS = ("session_id", "timestamp")

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_MS = timedelta(milliseconds=1)


class IngestError(Exception):
    """Fatal ingest problem: unreadable file, bad schema config, broken store."""


class RowRejected(Exception):
    """One record failed normalization; carries a machine-readable reason."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(slots=True)
class LogRow:
    """One raw logged interaction, normalized."""

    row_id: int
    session_id: str
    user_id: str | None
    timestamp: int  # UTC epoch milliseconds
    resultlist_ids: list[str]
    url: str
    referrer_url: str


@dataclass
class IngestReport:
    accepted_count: int = 0
    rejected_count: int = 0
    rejections: list[tuple[str, str]] = field(default_factory=list)  # (locator, reason)

    def reject(self, locator: str, reason: str) -> None:
        self.rejected_count += 1
        self.rejections.append((locator, reason))


@dataclass
class SchemaConfig:
    """Maps source columns onto the canonical row fields.

    ``columns`` maps canonical field name -> source column name. ``session_id``
    and ``timestamp`` must be mapped; unmapped optional fields come out empty.
    ``timestamp_format`` is one of the built-ins ``iso8601``,
    ``epoch_seconds``, ``epoch_millis``, or a strptime pattern. Timezone-less
    timestamps are interpreted in ``timezone`` (default UTC).
    """

    columns: dict[str, str]
    timestamp_format: str = "iso8601"
    timezone: str = "UTC"
    list_delimiter: str = ","
    csv_delimiter: str = ","

    def __post_init__(self) -> None:
        unknown = set(self.columns) - set(SOURCE_FIELDS)
        if unknown:
            raise IngestError(f"schema maps unknown fields: {sorted(unknown)}")
        missing = [f for f in _REQUIRED_FIELDS if f not in self.columns]
        if missing:
            raise IngestError(f"schema must map required fields: {missing}")
        self._tzinfo = _load_timezone(self.timezone)

    @classmethod
    def load(cls, path: str | Path) -> "SchemaConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise IngestError(f"cannot read schema config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise IngestError(f"schema config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict) or not isinstance(raw.get("columns"), dict):
            raise IngestError(f"schema config {path} must be an object with a 'columns' map")
        known = {"columns", "timestamp_format", "timezone", "list_delimiter", "csv_delimiter"}
        unknown = set(raw) - known
        if unknown:
            raise IngestError(f"schema config has unknown keys: {sorted(unknown)}")
        return cls(**raw)


def _load_timezone(name: str):
    if name.upper() == "UTC":
        return timezone.utc
    try:
        return ZoneInfo(name)
    except Exception as exc:
        raise IngestError(f"unknown timezone {name!r}") from exc


def _parse_timestamp(value: object, schema: SchemaConfig) -> int:
    fmt = schema.timestamp_format
    if value is None:
        raise RowRejected(REJECT_BAD_TIMESTAMP, "empty value")
    if fmt == "epoch_seconds":
        try:
            return int(round(float(value) * 1000.0))
        except (TypeError, ValueError):
            raise RowRejected(REJECT_BAD_TIMESTAMP, repr(value)) from None
    if fmt == "epoch_millis":
        try:
            return int(round(float(value)))
        except (TypeError, ValueError):
            raise RowRejected(REJECT_BAD_TIMESTAMP, repr(value)) from None
    text = str(value).strip()
    if not text:
        raise RowRejected(REJECT_BAD_TIMESTAMP, "empty value")
    if fmt == "iso8601":
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise RowRejected(REJECT_BAD_TIMESTAMP, repr(value)) from None
    else:
        try:
            dt = datetime.strptime(text, fmt)
        except ValueError:
            raise RowRejected(REJECT_BAD_TIMESTAMP, repr(value)) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=schema._tzinfo)
    return (dt - _EPOCH) // _MS


def _normalize_record(record: Mapping[str, object], schema: SchemaConfig) -> LogRow:
    """Normalize one column-name -> value mapping into a LogRow (row_id 0)."""

    def pick(fld: str, required: bool) -> object:
        col = schema.columns.get(fld)
        if col is None:
            return None
        if col not in record:
            if required:
                raise RowRejected(REJECT_WRONG_ARITY, f"missing column {col!r}")
            return None
        return record[col]

    raw_session = pick("session_id", required=True)
    session_id = "" if raw_session is None else str(raw_session)
    if not session_id:
        raise RowRejected(REJECT_MISSING_SESSION_ID)

    timestamp = _parse_timestamp(pick("timestamp", required=True), schema)

    raw_user = pick("user_id", required=False)
    user_id = None if raw_user is None else (str(raw_user) or None)

    raw_ids = pick("resultlist_ids", required=False)
    if raw_ids is None:
        resultlist_ids: list[str] = []
    elif isinstance(raw_ids, (list, tuple)):
        resultlist_ids = [str(x) for x in raw_ids]
    else:
        parts = str(raw_ids).split(schema.list_delimiter)
        resultlist_ids = [p.strip() for p in parts if p.strip()]

    raw_url = pick("url", required=False)
    raw_ref = pick("referrer_url", required=False)
    return LogRow(
        row_id=0,
        session_id=session_id,
        user_id=user_id,
        timestamp=timestamp,
        resultlist_ids=resultlist_ids,
        url="" if raw_url is None else str(raw_url),
        referrer_url="" if raw_ref is None else str(raw_ref),
    )


def parse_log_record(
    raw: str,
    schema: SchemaConfig,
    format: str = "csv",
    header: Sequence[str] | None = None,
) -> LogRow:
    """Parse a single text record into a LogRow (row_id 0; assigned at ingest).

    Raises RowRejected with one of the machine-readable reasons when the
    record cannot be normalized. CSV records need the file's ``header``.
    """
    if format == "csv":
        if header is None:
            raise IngestError("parsing a CSV record requires the header row")
        values = next(csv.reader([raw], delimiter=schema.csv_delimiter), [])
        if len(values) != len(header):
            raise RowRejected(REJECT_WRONG_ARITY, f"{len(values)} fields, header has {len(header)}")
        return _normalize_record(dict(zip(header, values)), schema)
    if format == "jsonl":
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError:
            raise RowRejected(REJECT_INVALID_JSON) from None
        if not isinstance(obj, dict):
            raise RowRejected(REJECT_INVALID_JSON, "record is not a JSON object")
        return _normalize_record(obj, schema)
    raise IngestError(f"unknown format {format!r} (expected csv or jsonl)")


class LogStore:
    """Append-only row store: a directory holding rows.jsonl plus meta.json.

    row_ids are assigned strictly in ingest order and never reused. Writing is
    single-writer by contract; readers may iterate committed rows at any time.
    """

    ROWS_NAME = "rows.jsonl"
    META_NAME = "meta.json"

    def __init__(self, root: str | Path, create: bool = True):
        self.root = Path(root)
        self.rows_path = self.root / self.ROWS_NAME
        self.meta_path = self.root / self.META_NAME
        if self.meta_path.exists():
            with open(self.meta_path, encoding="utf-8") as fh:
                meta = json.load(fh)
            if meta.get("format") != STORE_FORMAT:
                raise IngestError(f"{self.root} is not a row store")
            if meta.get("version") != STORE_VERSION:
                raise IngestError(f"unsupported store version {meta.get('version')}")
            self._next_row_id = int(meta["next_row_id"])
            self._row_count = int(meta["row_count"])
        elif create:
            self.root.mkdir(parents=True, exist_ok=True)
            self._next_row_id = 0
            self._row_count = 0
            self._write_meta()
        else:
            raise IngestError(f"no row store at {self.root}")

    def _write_meta(self) -> None:
        tmp = self.meta_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "format": STORE_FORMAT,
                    "version": STORE_VERSION,
                    "next_row_id": self._next_row_id,
                    "row_count": self._row_count,
                },
                fh,
            )
        tmp.replace(self.meta_path)

    def __len__(self) -> int:
        return self._row_count

    @contextmanager
    def writer(self):
        fh = open(self.rows_path, "a", encoding="utf-8")
        try:
            yield _StoreWriter(self, fh)
        finally:
            fh.close()
            self._write_meta()

    def iter_raw_lines(self) -> Iterator[str]:
        if not self.rows_path.exists():
            return
        with open(self.rows_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield line

    def iter_rows(self) -> Iterator[LogRow]:
        for line in self.iter_raw_lines():
            yield row_from_json_line(line)

    def __iter__(self) -> Iterator[LogRow]:
        return self.iter_rows()


class _StoreWriter:
    def __init__(self, store: LogStore, fh):
        self._store = store
        self._fh = fh

    def append(self, row: LogRow) -> LogRow:
        store = self._store
        row.row_id = store._next_row_id
        store._next_row_id += 1
        store._row_count += 1
        self._fh.write(row_to_json_line(row))
        return row


def row_to_json_line(row: LogRow) -> str:
    return (
        json.dumps(
            {
                "row_id": row.row_id,
                "session_id": row.session_id,
                "user_id": row.user_id,
                "timestamp": row.timestamp,
                "resultlist_ids": row.resultlist_ids,
                "url": row.url,
                "referrer_url": row.referrer_url,
            },
            separators=(",", ":"),
            ensure_ascii=False,
        )
        + "\n"
    )


def row_from_json_line(line: str) -> LogRow:
    obj = json.loads(line)
    return LogRow(
        row_id=obj["row_id"],
        session_id=obj["session_id"],
        user_id=obj.get("user_id"),
        timestamp=obj["timestamp"],
        resultlist_ids=list(obj.get("resultlist_ids") or ()),
        url=obj.get("url", ""),
        referrer_url=obj.get("referrer_url", ""),
    )


def ingest_file(
    path: str | Path,
    format: str,
    schema: SchemaConfig,
    store: LogStore,
) -> IngestReport:
    """Append all parseable records of a log file to the store.

    Per-record failures are counted and reported, never fatal; an unreadable
    file or a header that lacks a mapped column is. Re-running on the same
    file appends the rows again: the store does not deduplicate.
    """
    path = Path(path)
    report = IngestReport()
    try:
        fh = open(path, encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh, store.writer() as writer:
        if format == "csv":
            reader = csv.reader(fh, delimiter=schema.csv_delimiter)
            header = next(reader, None)
            if header is None:
                raise IngestError(f"{path}: empty file, CSV ingest requires a header row")
            missing = [c for c in schema.columns.values() if c not in header]
            if missing:
                raise IngestError(f"{path}: header lacks mapped columns {missing}")
            arity = len(header)
            for record in reader:
                if not record:
                    continue  # blank line, not a record
                locator = f"line {reader.line_num}"
                if len(record) != arity:
                    report.reject(locator, REJECT_WRONG_ARITY)
                    continue
                _ingest_record(dict(zip(header, record)), schema, writer, report, locator)
        elif format == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    continue
                locator = f"line {lineno}"
                try:
                    obj = json.loads(stripped)
                except json.JSONDecodeError:
                    report.reject(locator, REJECT_INVALID_JSON)
                    continue
                if not isinstance(obj, dict):
                    report.reject(locator, REJECT_INVALID_JSON)
                    continue
                _ingest_record(obj, schema, writer, report, locator)
        else:
            raise IngestError(f"unknown format {format!r} (expected csv or jsonl)")
    return report


def _ingest_record(record, schema, writer, report, locator) -> None:
    try:
        row = _normalize_record(record, schema)
    except RowRejected as exc:
        report.reject(locator, exc.reason)
        return
    writer.append(row)
    report.accepted_count += 1
