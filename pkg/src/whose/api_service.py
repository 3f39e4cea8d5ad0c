"""Read-only HTTP API over a loaded analysis store.

Every response is a pure view of the immutable store; repeating a request
yields an identical body (the flow endpoint is byte-identical by
construction). The optional X-Now header overrides the server clock for time
presets, which keeps preset queries reproducible in tests.
"""

from __future__ import annotations

import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from whose.filter_engine import (
    FilterValidationError,
    apply_filters,
    filter_spec_from_json,
    resolve_time_range,
    time_range_from_json,
)
from whose.flow_aggregator import DEFAULT_MAX_STEPS, aggregate, encode_flow
from whose.mapping_engine import UNMATCHED_ACTION
from whose.session_store import SessionNotFound, SessionStore, session_summary

MAX_PAGE_LIMIT = 500
DEFAULT_PAGE_LIMIT = 50

UNMATCHED_LABELS = {"en": "Unmatched", "de": "Nicht zugeordnet"}


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    body = {"error_code": code, "message": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(body, status_code=status)


def _labels_for(catalog_by_id: dict[str, dict], action_id: str) -> dict:
    entry = catalog_by_id.get(action_id)
    if entry is not None:
        return entry["labels"]
    if action_id == UNMATCHED_ACTION:
        return UNMATCHED_LABELS
    return {"en": action_id}


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise FilterValidationError("body", "request body must be JSON") from None
    if body is None:
        return {}
    if not isinstance(body, dict):
        raise FilterValidationError("body", "request body must be a JSON object")
    return body


def _now_ms(request: Request) -> int:
    header = request.headers.get("x-now")
    if header is not None:
        try:
            return int(header)
        except ValueError:
            raise FilterValidationError("x-now", "must be epoch milliseconds") from None
    return int(time.time() * 1000)


def _page_params(body: dict) -> tuple[int, int]:
    page = body.get("page") or {}
    if not isinstance(page, dict) or set(page) - {"offset", "limit"}:
        raise FilterValidationError("page", "must be {offset?, limit?}")
    offset = page.get("offset", 0)
    limit = page.get("limit", DEFAULT_PAGE_LIMIT)
    if isinstance(offset, bool) or not isinstance(offset, int) or offset < 0:
        raise FilterValidationError("page.offset", "must be an integer >= 0")
    if isinstance(limit, bool) or not isinstance(limit, int) or not 1 <= limit <= MAX_PAGE_LIMIT:
        raise FilterValidationError("page.limit", f"must be an integer in 1..{MAX_PAGE_LIMIT}")
    return offset, limit


def create_app(store: SessionStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="whose", docs_url=None, redoc_url=None)
    catalog_by_id = {entry["action_id"]: entry for entry in store.catalog}
    sessions = store.sessions  # immutable after load

    @app.exception_handler(FilterValidationError)
    async def _validation_error(_request, exc: FilterValidationError):
        return _error(400, "invalid_request", exc.message, field=exc.field)

    @app.get("/api/actions")
    async def actions():
        entries = [
            {"action_id": e["action_id"], "labels": e["labels"]} for e in store.catalog
        ]
        entries.append({"action_id": UNMATCHED_ACTION, "labels": UNMATCHED_LABELS})
        return JSONResponse(entries)

    @app.post("/api/sessions")
    async def query_sessions(request: Request):
        body = await _json_body(request)
        unknown = set(body) - {"time_range", "filter", "page"}
        if unknown:
            raise FilterValidationError("body", f"unknown keys {sorted(unknown)}")
        offset, limit = _page_params(body)
        spec = filter_spec_from_json(body.get("filter"))
        bounds = resolve_time_range(time_range_from_json(body.get("time_range")), _now_ms(request))
        hits = apply_filters(sessions, spec, bounds)
        return JSONResponse(
            {
                "total": len(hits),
                "sessions": [session_summary(s) for s in hits[offset : offset + limit]],
            }
        )

    @app.post("/api/flow")
    async def query_flow(request: Request):
        body = await _json_body(request)
        unknown = set(body) - {"time_range", "filter", "max_steps"}
        if unknown:
            raise FilterValidationError("body", f"unknown keys {sorted(unknown)}")
        max_steps = body.get("max_steps", DEFAULT_MAX_STEPS)
        if isinstance(max_steps, bool) or not isinstance(max_steps, int) or max_steps < 1:
            raise FilterValidationError("max_steps", "must be an integer >= 1")
        spec = filter_spec_from_json(body.get("filter"))
        bounds = resolve_time_range(time_range_from_json(body.get("time_range")), _now_ms(request))
        flow = aggregate(apply_filters(sessions, spec, bounds), max_steps)
        return Response(content=encode_flow(flow), media_type="application/json")

    @app.get("/api/sessions/{session_id}")
    async def session_detail(session_id: str):
        try:
            s = store.get_session(session_id)
        except SessionNotFound:
            return _error(404, "not_found", f"no session {session_id!r}")
        return JSONResponse(
            {
                "session_id": s.session_id,
                "user_id": s.user_id,
                "start_ts": s.start_ts,
                "end_ts": s.end_ts,
                "duration_ms": s.duration_ms,
                "action_count": s.action_count,
                "actions": [
                    {
                        "step_index": a.step_index,
                        "action_id": a.action_id,
                        "labels": _labels_for(catalog_by_id, a.action_id),
                        "timestamp": a.timestamp,
                        "duration_ms": a.duration_ms,
                        "entities": a.entities,
                        "url": a.url,
                    }
                    for a in s.actions
                ],
            }
        )

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
