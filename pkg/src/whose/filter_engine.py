"""Time restriction plus the seven combinable session filters.

All present clauses are ANDed; there is no OR/NOT algebra. Semantics are a
naive per-session predicate scan; nothing here indexes, so the filtered set
is exactly { s | session_matches(s) }, newest first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from whose.session_store import Session

DAY_MS = 86_400_000
PRESET_DAYS = {"last_7_days": 7, "last_30_days": 30}
PRESETS = ("all", "last_7_days", "last_30_days", "custom")


class FilterValidationError(ValueError):
    """A filter/time-range payload failed validation; names the field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


@dataclass(frozen=True)
class TimeRange:
    """A preset or explicit window over session start times.

    ``now`` is injected, never read from the clock here, so presets stay
    testable and reproducible.
    """

    preset: str = "all"
    start_ts: int | None = None
    end_ts: int | None = None
    now: int | None = None


@dataclass(frozen=True)
class FilterSpec:
    contains_text: str | None = None
    session_duration_min_ms: int | None = None
    session_duration_max_ms: int | None = None
    logged_in_only: bool = False
    user_id: str | None = None
    min_actions_exclusive: int | None = None
    contains_action: str | None = None
    action_duration_action_id: str | None = None
    action_duration_min_ms: int | None = None


def resolve_time_range(tr: TimeRange, fallback_now: int | None = None) -> tuple[int | None, int | None]:
    """Concrete inclusive [start, end] bounds in epoch ms; None = unbounded."""
    if tr.preset == "all":
        return (None, None)
    if tr.preset == "custom":
        if tr.start_ts is None or tr.end_ts is None:
            raise FilterValidationError("time_range", "custom range needs start_ts and end_ts")
        if tr.start_ts > tr.end_ts:
            raise FilterValidationError("time_range", "start_ts is after end_ts")
        return (tr.start_ts, tr.end_ts)
    days = PRESET_DAYS.get(tr.preset)
    if days is None:
        raise FilterValidationError("time_range.preset", f"unknown preset {tr.preset!r}")
    now = tr.now if tr.now is not None else fallback_now
    if now is None:
        raise FilterValidationError("time_range.now", f"preset {tr.preset!r} needs an injected now")
    return (now - days * DAY_MS, now)


def session_matches(s: Session, spec: FilterSpec, time_bounds: tuple[int | None, int | None]) -> bool:
    start, end = time_bounds
    if start is not None and s.start_ts < start:
        return False
    if end is not None and s.start_ts > end:
        return False
    if spec.contains_text is not None:
        needle = spec.contains_text.lower()
        if not _session_contains_text(s, needle):
            return False
    if spec.session_duration_min_ms is not None and s.duration_ms < spec.session_duration_min_ms:
        return False
    if spec.session_duration_max_ms is not None and s.duration_ms > spec.session_duration_max_ms:
        return False
    if spec.logged_in_only and s.user_id is None:
        return False
    if spec.user_id is not None and s.user_id != spec.user_id:
        return False
    if spec.min_actions_exclusive is not None and not s.action_count > spec.min_actions_exclusive:
        return False
    if spec.contains_action is not None and all(
        a.action_id != spec.contains_action for a in s.actions
    ):
        return False
    if spec.action_duration_min_ms is not None:
        wanted = spec.action_duration_action_id
        # Absent durations (the last action of a session) never satisfy a
        # duration threshold.
        if not any(
            (wanted is None or a.action_id == wanted)
            and a.duration_ms is not None
            and a.duration_ms >= spec.action_duration_min_ms
            for a in s.actions
        ):
            return False
    return True


def _session_contains_text(s: Session, needle: str) -> bool:
    # Extracted entity values first, then the raw urls as a fallback so
    # parameters nobody wrote an extraction rule for stay findable.
    for a in s.actions:
        for values in a.entities.values():
            for v in values:
                if needle in v.lower():
                    return True
    return any(needle in a.url.lower() for a in s.actions)


def apply_filters(
    sessions: Iterable[Session],
    spec: FilterSpec,
    time_bounds: tuple[int | None, int | None],
) -> list[Session]:
    """Matching sessions ordered by descending start date (ties: session id)."""
    hits = [s for s in sessions if session_matches(s, spec, time_bounds)]
    hits.sort(key=lambda s: (-s.start_ts, s.session_id))
    return hits


# ---------------------------------------------------------------------------
# Canonical JSON encodings, shared by the HTTP API and the CLI --filter flag.
# ---------------------------------------------------------------------------


def _require_int(obj: dict, key: str, field: str, minimum: int | None = None) -> int | None:
    if key not in obj or obj[key] is None:
        return None
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise FilterValidationError(field, "must be an integer")
    if minimum is not None and value < minimum:
        raise FilterValidationError(field, f"must be >= {minimum}")
    return value


def _require_str(obj: dict, key: str, field: str) -> str | None:
    if key not in obj or obj[key] is None:
        return None
    value = obj[key]
    if not isinstance(value, str):
        raise FilterValidationError(field, "must be a string")
    return value


def time_range_from_json(obj: object) -> TimeRange:
    if obj is None:
        return TimeRange()
    if not isinstance(obj, dict):
        raise FilterValidationError("time_range", "must be an object")
    unknown = set(obj) - {"preset", "start_ts", "end_ts", "now"}
    if unknown:
        raise FilterValidationError("time_range", f"unknown keys {sorted(unknown)}")
    preset = obj.get("preset", "all")
    if preset not in PRESETS:
        raise FilterValidationError("time_range.preset", f"unknown preset {preset!r}")
    return TimeRange(
        preset=preset,
        start_ts=_require_int(obj, "start_ts", "time_range.start_ts"),
        end_ts=_require_int(obj, "end_ts", "time_range.end_ts"),
        now=_require_int(obj, "now", "time_range.now"),
    )


def time_range_to_json(tr: TimeRange) -> dict:
    out: dict = {"preset": tr.preset}
    if tr.start_ts is not None:
        out["start_ts"] = tr.start_ts
    if tr.end_ts is not None:
        out["end_ts"] = tr.end_ts
    if tr.now is not None:
        out["now"] = tr.now
    return out


def filter_spec_from_json(obj: object) -> FilterSpec:
    if obj is None:
        return FilterSpec()
    if not isinstance(obj, dict):
        raise FilterValidationError("filter", "must be an object")
    known = {
        "contains_text",
        "session_duration",
        "logged_in_only",
        "user_id",
        "min_actions_exclusive",
        "contains_action",
        "action_duration",
    }
    unknown = set(obj) - known
    if unknown:
        raise FilterValidationError("filter", f"unknown keys {sorted(unknown)}")

    dur_min = dur_max = None
    if obj.get("session_duration") is not None:
        dur = obj["session_duration"]
        if not isinstance(dur, dict) or set(dur) - {"min_ms", "max_ms"}:
            raise FilterValidationError("filter.session_duration", "must be {min_ms?, max_ms?}")
        dur_min = _require_int(dur, "min_ms", "filter.session_duration.min_ms", minimum=0)
        dur_max = _require_int(dur, "max_ms", "filter.session_duration.max_ms", minimum=0)
        if dur_min is not None and dur_max is not None and dur_min > dur_max:
            raise FilterValidationError("filter.session_duration", "min_ms is greater than max_ms")

    act_id = act_min = None
    if obj.get("action_duration") is not None:
        ad = obj["action_duration"]
        if not isinstance(ad, dict) or set(ad) - {"action_id", "min_ms"}:
            raise FilterValidationError("filter.action_duration", "must be {action_id?, min_ms}")
        act_min = _require_int(ad, "min_ms", "filter.action_duration.min_ms", minimum=0)
        if act_min is None:
            raise FilterValidationError("filter.action_duration.min_ms", "is required")
        act_id = _require_str(ad, "action_id", "filter.action_duration.action_id")

    logged_in = obj.get("logged_in_only", False)
    if logged_in is None:
        logged_in = False
    if not isinstance(logged_in, bool):
        raise FilterValidationError("filter.logged_in_only", "must be a boolean")

    return FilterSpec(
        contains_text=_require_str(obj, "contains_text", "filter.contains_text"),
        session_duration_min_ms=dur_min,
        session_duration_max_ms=dur_max,
        logged_in_only=logged_in,
        user_id=_require_str(obj, "user_id", "filter.user_id"),
        min_actions_exclusive=_require_int(obj, "min_actions_exclusive", "filter.min_actions_exclusive", minimum=0),
        contains_action=_require_str(obj, "contains_action", "filter.contains_action"),
        action_duration_action_id=act_id,
        action_duration_min_ms=act_min,
    )


def filter_spec_to_json(spec: FilterSpec) -> dict:
    out: dict = {}
    if spec.contains_text is not None:
        out["contains_text"] = spec.contains_text
    if spec.session_duration_min_ms is not None or spec.session_duration_max_ms is not None:
        dur: dict = {}
        if spec.session_duration_min_ms is not None:
            dur["min_ms"] = spec.session_duration_min_ms
        if spec.session_duration_max_ms is not None:
            dur["max_ms"] = spec.session_duration_max_ms
        out["session_duration"] = dur
    if spec.logged_in_only:
        out["logged_in_only"] = True
    if spec.user_id is not None:
        out["user_id"] = spec.user_id
    if spec.min_actions_exclusive is not None:
        out["min_actions_exclusive"] = spec.min_actions_exclusive
    if spec.contains_action is not None:
        out["contains_action"] = spec.contains_action
    if spec.action_duration_min_ms is not None:
        ad: dict = {}
        if spec.action_duration_action_id is not None:
            ad["action_id"] = spec.action_duration_action_id
        ad["min_ms"] = spec.action_duration_min_ms
        out["action_duration"] = ad
    return out
