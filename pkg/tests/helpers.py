"""Small builders for hand-assembled sessions in filter/flow tests."""

from __future__ import annotations

from whose.mapping_engine import ActionInstance
from whose.session_store import Session


def make_session(
    session_id: str,
    action_ids: list[str],
    start_ts: int = 1_400_000_000_000,
    gap_ms: int = 10_000,
    timestamps: list[int] | None = None,
    user_id: str | None = None,
    entities: list[dict] | None = None,
    urls: list[str] | None = None,
) -> Session:
    if timestamps is None:
        timestamps = [start_ts + i * gap_ms for i in range(len(action_ids))]
    assert len(timestamps) == len(action_ids)
    actions = []
    for i, (action_id, ts) in enumerate(zip(action_ids, timestamps)):
        duration = timestamps[i + 1] - ts if i + 1 < len(timestamps) else None
        actions.append(
            ActionInstance(
                session_id=session_id,
                source_row_id=i,
                action_id=action_id,
                timestamp=ts,
                intra_row_index=0,
                step_index=i + 1,
                duration_ms=duration,
                entities=dict(entities[i]) if entities else {},
                url=urls[i] if urls else f"/{action_id}/{i}",
            )
        )
    return Session(
        session_id=session_id,
        user_id=user_id,
        start_ts=timestamps[0],
        end_ts=timestamps[-1],
        duration_ms=timestamps[-1] - timestamps[0],
        action_count=len(actions),
        actions=actions,
    )
