from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from whose.api_service import create_app
from whose.filter_engine import FilterSpec, apply_filters, filter_spec_from_json
from whose.flow_aggregator import aggregate, encode_flow
from whose.session_store import SessionStore, session_summary


@pytest.fixture(scope="module")
def client(demo_session_store):
    return TestClient(create_app(demo_session_store))


def test_actions_catalog_plus_sentinel(client, demo_session_store):
    entries = client.get("/api/actions").json()
    assert [e["action_id"] for e in entries[:-1]] == [
        e["action_id"] for e in demo_session_store.catalog
    ]
    assert entries[-1]["action_id"] == "__unmatched__"
    by_id = {e["action_id"]: e["labels"] for e in entries}
    assert by_id["simple_search_home"] == {
        "en": "Simple search from the homepage",
        "de": "Einfache Suche von der Startseite",
    }


def test_actions_empty_catalog_still_has_sentinel():
    client = TestClient(create_app(SessionStore([])))
    entries = client.get("/api/actions").json()
    assert [e["action_id"] for e in entries] == ["__unmatched__"]


def test_sessions_empty_spec_returns_everything(client, demo_session_store):
    body = client.post("/api/sessions", json={}).json()
    assert body["total"] == len(demo_session_store)
    assert len(body["sessions"]) == 50  # default page limit
    assert body["sessions"][0] == session_summary(demo_session_store.sessions[0])


def test_sessions_pagination_partitions(client, demo_session_store):
    seen = []
    offset = 0
    while True:
        body = client.post(
            "/api/sessions", json={"page": {"offset": offset, "limit": 37}}
        ).json()
        seen.extend(s["session_id"] for s in body["sessions"])
        offset += 37
        if not body["sessions"]:
            break
    expected = [s.session_id for s in demo_session_store.sessions]
    assert seen == expected


def test_sessions_offset_beyond_total(client, demo_session_store):
    body = client.post("/api/sessions", json={"page": {"offset": 10_000}}).json()
    assert body["total"] == len(demo_session_store)
    assert body["sessions"] == []


def test_sessions_filter_equals_library_path(client, demo_session_store):
    payload = {"filter": {"logged_in_only": True, "contains_action": "view_record"}}
    body = client.post("/api/sessions", json=payload).json()
    spec = filter_spec_from_json(payload["filter"])
    expected = apply_filters(demo_session_store.sessions, spec, (None, None))
    assert body["total"] == len(expected)
    assert [s["session_id"] for s in body["sessions"]] == [s.session_id for s in expected[:50]]


@pytest.mark.parametrize(
    "payload,field",
    [
        ({"filter": {"bogus": 1}}, "filter"),
        ({"page": {"limit": 0}}, "page.limit"),
        ({"page": {"limit": 501}}, "page.limit"),
        ({"page": {"offset": -1}}, "page.offset"),
        ({"time_range": {"preset": "nope"}}, "time_range.preset"),
        ({"unexpected": {}}, "body"),
    ],
)
def test_sessions_validation_errors(client, payload, field):
    resp = client.post("/api/sessions", json=payload)
    assert resp.status_code == 400
    body = resp.json()
    assert body["error_code"] == "invalid_request"
    assert body["field"] == field
    assert body["message"]


def test_sessions_malformed_json_body(client):
    resp = client.post("/api/sessions", content=b"{nope", headers={"content-type": "application/json"})
    assert resp.status_code == 400
    assert resp.json()["error_code"] == "invalid_request"


def test_flow_equals_library_path(client, demo_session_store):
    payload = {"filter": {"contains_action": "simple_search"}, "max_steps": 5}
    resp = client.post("/api/flow", json=payload)
    expected = encode_flow(
        aggregate(
            apply_filters(
                demo_session_store.sessions,
                FilterSpec(contains_action="simple_search"),
                (None, None),
            ),
            5,
        )
    )
    assert resp.content == expected


def test_flow_identical_requests_byte_identical(client):
    payload = {"filter": {"logged_in_only": True}}
    first = client.post("/api/flow", json=payload).content
    second = client.post("/api/flow", json=payload).content
    assert first == second


def test_flow_max_steps_zero_rejected(client):
    resp = client.post("/api/flow", json={"max_steps": 0})
    assert resp.status_code == 400
    assert resp.json()["field"] == "max_steps"


def test_flow_excluding_everything(client):
    resp = client.post("/api/flow", json={"filter": {"user_id": "no-such-user"}})
    body = resp.json()
    assert body["session_total"] == 0
    assert body["nodes"] == [] and body["edges"] == []


def test_flow_default_max_steps_is_eight(client):
    body = client.post("/api/flow", json={}).json()
    assert body["max_steps"] == 8


def test_time_preset_uses_x_now_header(client, demo_session_store):
    newest = demo_session_store.sessions[0].start_ts
    resp = client.post(
        "/api/sessions",
        json={"time_range": {"preset": "last_7_days"}},
        headers={"x-now": str(newest)},
    )
    body = resp.json()
    lo, hi = newest - 7 * 86_400_000, newest
    expected = [s for s in demo_session_store.sessions if lo <= s.start_ts <= hi]
    assert body["total"] == len(expected)
    assert 0 < body["total"] < len(demo_session_store)


def test_now_inside_time_range_beats_header(client, demo_session_store):
    newest = demo_session_store.sessions[0].start_ts
    with_field = client.post(
        "/api/sessions",
        json={"time_range": {"preset": "last_7_days", "now": newest}},
        headers={"x-now": "0"},
    ).json()
    assert with_field["total"] > 0


def test_bad_x_now_header(client):
    resp = client.post(
        "/api/sessions",
        json={"time_range": {"preset": "last_7_days"}},
        headers={"x-now": "soonish"},
    )
    assert resp.status_code == 400


def test_session_detail_roundtrip(client, demo_session_store):
    s = demo_session_store.sessions[0]
    body = client.get(f"/api/sessions/{s.session_id}").json()
    assert body["session_id"] == s.session_id
    assert body["action_count"] == s.action_count
    assert len(body["actions"]) == s.action_count
    for got, want in zip(body["actions"], s.actions):
        assert got["step_index"] == want.step_index
        assert got["action_id"] == want.action_id
        assert got["timestamp"] == want.timestamp
        assert got["duration_ms"] == want.duration_ms
        assert got["entities"] == want.entities
        assert got["url"] == want.url
        assert got["labels"]


def test_session_detail_includes_extracted_search_terms(client, demo_session_store):
    wanted = None
    for s in demo_session_store.sessions:
        for a in s.actions:
            if "search_term" in a.entities:
                wanted = s
                break
        if wanted:
            break
    assert wanted is not None
    body = client.get(f"/api/sessions/{wanted.session_id}").json()
    assert any("search_term" in a["entities"] for a in body["actions"])


def test_session_detail_unknown_id_404(client):
    resp = client.get("/api/sessions/no-such-session")
    assert resp.status_code == 404
    assert resp.json()["error_code"] == "not_found"


def test_responses_are_repeatable(client):
    a = client.post("/api/sessions", json={"filter": {"min_actions_exclusive": 2}}).json()
    b = client.post("/api/sessions", json={"filter": {"min_actions_exclusive": 2}}).json()
    assert a == b


def test_ui_dir_served_at_root(tmp_path, demo_session_store):
    (tmp_path / "index.html").write_text("<html><body>explorer</body></html>")
    client = TestClient(create_app(demo_session_store, ui_dir=tmp_path))
    resp = client.get("/")
    assert resp.status_code == 200
    assert "explorer" in resp.text
    # api routes still take precedence
    assert client.get("/api/actions").status_code == 200
