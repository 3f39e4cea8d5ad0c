"""Group actions into sessions, compute durations, persist and serve the
analysis table.

A session is exactly the set of actions sharing one logged session id; there
is no timeout-based splitting. An action's duration is the gap to the next
action's timestamp; the last action of a session has no duration (absent, not
zero), so the present durations always sum to the session duration.
"""

from __future__ import annotations

import json
import multiprocessing
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from whose.mapping_engine import ActionInstance, AnalysisTable

ANALYSIS_FORMAT = "whose-analysis"
ANALYSIS_VERSION = 1


class AnalysisFormatError(Exception):
    """The analysis file is missing, malformed, or structurally broken."""


class UnsupportedVersionError(AnalysisFormatError):
    def __init__(self, version):
        super().__init__(f"unsupported_version: {version!r} (expected {ANALYSIS_VERSION})")
        self.version = version


class SessionNotFound(KeyError):
    pass


@dataclass
class Session:
    session_id: str
    user_id: str | None
    start_ts: int
    end_ts: int
    duration_ms: int
    action_count: int
    actions: list[ActionInstance] = field(default_factory=list)


def build_sessions(table: AnalysisTable) -> list[Session]:
    """One Session per distinct session id, with step indices and durations.

    Expects the table in canonical order, so each session's actions form one
    contiguous, chronologically sorted run.
    """
    sessions: list[Session] = []
    actions = table.actions
    n = len(actions)
    i = 0
    while i < n:
        j = i
        sid = actions[i].session_id
        while j < n and actions[j].session_id == sid:
            j += 1
        run = actions[i:j]
        for step, act in enumerate(run, start=1):
            act.step_index = step
            act.duration_ms = run[step].timestamp - act.timestamp if step < len(run) else None
        sessions.append(
            Session(
                session_id=sid,
                user_id=table.session_users.get(sid),
                start_ts=run[0].timestamp,
                end_ts=run[-1].timestamp,
                duration_ms=run[-1].timestamp - run[0].timestamp,
                action_count=len(run),
                actions=run,
            )
        )
        i = j
    return sessions


def session_summary(s: Session) -> dict:
    return {
        "session_id": s.session_id,
        "logged_in": s.user_id is not None,
        "start_ts": s.start_ts,
        "duration_ms": s.duration_ms,
        "action_count": s.action_count,
    }


class SessionStore:
    """Immutable lookup over a built session set plus the action catalog.

    The catalog is the distinct (action_id, labels) list of the mapping table
    the analysis was produced with; it rides along in the persisted file so a
    serving process needs nothing but the file.
    """

    def __init__(self, sessions: Iterable[Session], catalog: Sequence[dict] = ()):
        self._by_id: dict[str, Session] = {}
        for s in sessions:
            if s.session_id in self._by_id:
                raise AnalysisFormatError(f"duplicate session id {s.session_id!r}")
            self._by_id[s.session_id] = s
        # Newest first; ties broken by session id for a stable listing.
        self._ordered = sorted(self._by_id.values(), key=lambda s: (-s.start_ts, s.session_id))
        self.catalog = [dict(entry) for entry in catalog]

    @property
    def sessions(self) -> list[Session]:
        return list(self._ordered)

    def __len__(self) -> int:
        return len(self._ordered)

    def get_session(self, session_id: str) -> Session:
        try:
            return self._by_id[session_id]
        except KeyError:
            raise SessionNotFound(session_id) from None

    def list_sessions(self, offset: int = 0, limit: int = 50) -> tuple[int, list[dict]]:
        """(total, page of summaries), ordered by descending start date."""
        if offset < 0 or limit < 1:
            raise ValueError("offset must be >= 0 and limit >= 1")
        return len(self._ordered), [session_summary(s) for s in self._ordered[offset : offset + limit]]

    def save(self, path: str | Path) -> None:
        persist(self._ordered, path, catalog=self.catalog)

    @classmethod
    def load(cls, path: str | Path) -> "SessionStore":
        return load(path)


def _action_record(a: ActionInstance) -> dict:
    return {
        "session_id": a.session_id,
        "source_row_id": a.source_row_id,
        "action_id": a.action_id,
        "timestamp": a.timestamp,
        "intra_row_index": a.intra_row_index,
        "step_index": a.step_index,
        "duration_ms": a.duration_ms,
        "entities": {k: a.entities[k] for k in sorted(a.entities)},
        "url": a.url,
    }


def _session_record(s: Session) -> dict:
    return {
        "session_id": s.session_id,
        "user_id": s.user_id,
        "start_ts": s.start_ts,
        "end_ts": s.end_ts,
        "duration_ms": s.duration_ms,
        "action_count": s.action_count,
    }


def _dump(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n"


def _session_block(s: Session) -> str:
    parts = [_dump(_session_record(s))]
    parts.extend(_dump(_action_record(a)) for a in s.actions)
    return "".join(parts)


# Encoding a big table is embarrassingly parallel per session. Workers are
# forked after the session list exists, so they see it as module state and
# only (start, end) index pairs cross the pipe.
_encode_sessions: list[Session] | None = None


def _encode_slice(index_range: tuple[int, int]) -> str:
    start, end = index_range
    return "".join(_session_block(s) for s in _encode_sessions[start:end])


def persist(
    sessions: Iterable[Session],
    path: str | Path,
    catalog: Sequence[dict] = (),
    worker_count: int = 1,
) -> None:
    """Write the analysis table: a version header line, then per session one
    header object followed by one object per action. Timestamps are epoch
    milliseconds. The byte stream is a pure function of the content;
    worker_count only parallelizes the JSON encoding.
    """
    global _encode_sessions
    ordered = sorted(sessions, key=lambda s: s.session_id)
    header = _dump(
        {
            "format": ANALYSIS_FORMAT,
            "version": ANALYSIS_VERSION,
            "catalog": [
                {"action_id": e["action_id"], "labels": e.get("labels", {})} for e in catalog
            ],
        }
    )
    parallel = worker_count > 1 and len(ordered) > 64 and sys.platform != "win32"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header)
        if not parallel:
            for s in ordered:
                fh.write(_session_block(s))
            return
        slice_size = max(1, len(ordered) // (worker_count * 4))
        ranges = [(i, min(i + slice_size, len(ordered))) for i in range(0, len(ordered), slice_size)]
        _encode_sessions = ordered
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=worker_count) as pool:
                for block in pool.imap(_encode_slice, ranges):
                    fh.write(block)
        finally:
            _encode_sessions = None


def load(path: str | Path) -> SessionStore:
    """Read an analysis table back; the round trip is lossless."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise AnalysisFormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise AnalysisFormatError(f"{path}: empty file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise AnalysisFormatError(f"{path}: bad header line: {exc}") from exc
        if not isinstance(header, dict) or header.get("format") != ANALYSIS_FORMAT:
            raise AnalysisFormatError(f"{path}: not an analysis table")
        if header.get("version") != ANALYSIS_VERSION:
            raise UnsupportedVersionError(header.get("version"))
        catalog = header.get("catalog", [])
        sessions: list[Session] = []
        current: Session | None = None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnalysisFormatError(f"{path}:{lineno}: bad record: {exc}") from exc
            if "action_count" in obj:  # session header
                current = Session(
                    session_id=obj["session_id"],
                    user_id=obj.get("user_id"),
                    start_ts=obj["start_ts"],
                    end_ts=obj["end_ts"],
                    duration_ms=obj["duration_ms"],
                    action_count=obj["action_count"],
                    actions=[],
                )
                sessions.append(current)
            else:
                if current is None or obj.get("session_id") != current.session_id:
                    raise AnalysisFormatError(f"{path}:{lineno}: action record outside its session")
                current.actions.append(
                    ActionInstance(
                        session_id=obj["session_id"],
                        source_row_id=obj["source_row_id"],
                        action_id=obj["action_id"],
                        timestamp=obj["timestamp"],
                        intra_row_index=obj["intra_row_index"],
                        step_index=obj["step_index"],
                        duration_ms=obj.get("duration_ms"),
                        entities={k: list(v) for k, v in obj.get("entities", {}).items()},
                        url=obj.get("url", ""),
                    )
                )
        for s in sessions:
            if len(s.actions) != s.action_count:
                raise AnalysisFormatError(
                    f"{path}: session {s.session_id!r} lists {s.action_count} actions, "
                    f"found {len(s.actions)}"
                )
    return SessionStore(sessions, catalog=catalog)
