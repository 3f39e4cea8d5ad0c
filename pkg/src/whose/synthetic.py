"""Synthetic log/rule generators for tests, demos and benchmarks.

Everything is seeded and deterministic. The demo rule set mimics a discovery
portal: record views, searches, facets, exports. Some URLs intentionally
match several rules (a facet URL is also a search) so multi-action rows show
up in generated data, the way they do in real logs.
"""

from __future__ import annotations

import csv
import random
from pathlib import Path

from whose.ingestion import LogRow, LogStore
from whose.mapping_engine import EXTRACTION_COLUMNS, MAPPING_COLUMNS

HOMEPAGE = "https://portal.example/"

#: action_id, label_en, label_de, referrer_param, url_param
DEMO_MAPPING_ROWS = [
    ("view_record", "View record", "Titelansicht", "", r"/record/\d+(?:$|\?)"),
    ("view_abstract", "View abstract", "Abstract ansehen", "", r"/record/\d+\?expand=abstract"),
    ("view_comments", "View comments", "Kommentare ansehen", "", r"/record/\d+\?expand=comments"),
    (
        "simple_search_home",
        "Simple search from the homepage",
        "Einfache Suche von der Startseite",
        r"^https://portal\.example/$",
        r"/search/results\?",
    ),
    ("simple_search", "Simple search", "Einfache Suche", "", r"/search/results\?lookfor="),
    ("advanced_search", "Advanced search", "Erweiterte Suche", "", r"/search/advanced"),
    ("facet_filter", "Apply facet", "Facette anwenden", "", r"[?&]filter\[\]="),
    ("paginate", "Next result page", "Weiterblättern", "", r"[?&]page=\d+"),
    ("export_record", "Export record", "Titel exportieren", "", r"/record/\d+/export"),
    ("add_favorite", "Add to favorites", "Zu Favoriten", "", r"/favorites/add\?"),
    ("view_fulltext", "Open full text", "Volltext öffnen", "", r"/record/\d+/fulltext"),
    ("go_home", "Go to homepage", "Zur Startseite", "", r"^https://portal\.example/$"),
]

DEMO_EXTRACTION_ROWS = [
    ("simple_search", "search_term", "text", "url", r"lookfor=([^&]*)"),
    ("simple_search_home", "search_term", "text", "url", r"lookfor=([^&]*)"),
    ("facet_filter", "facet", "text", "url", r"[?&]filter\[\]=([^&]*)"),
    ("view_record", "document_id", "text", "url", r"/record/(\d+)"),
    ("*", "result_ids", "field", "resultlist_ids", ""),
]

SEARCH_TERMS = [
    "religion",
    "migration",
    "social%20capital",
    "education",
    "labour+market",
    "demografie",
    "inequality",
    "survey%20methods",
]

#: URLs for these actions match exactly one mapping rule, so a generator can
#: pin a session's first action without multi-match surprises.
SINGLE_MATCH_ACTIONS = ("view_record", "simple_search", "advanced_search", "add_favorite", "go_home")

_MID_SESSION_ACTIONS = [
    "view_record",
    "view_abstract",
    "view_comments",
    "simple_search",
    "simple_search_home",
    "advanced_search",
    "facet_filter",
    "paginate",
    "export_record",
    "add_favorite",
    "view_fulltext",
    "go_home",
]

BASE_TS = 1_398_902_400_000  # 2014-05-01T00:00:00Z


def write_mapping_csv(path: str | Path, rows=DEMO_MAPPING_ROWS) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MAPPING_COLUMNS)
        for order, (action_id, label_en, label_de, referrer, url) in enumerate(rows):
            writer.writerow([order, action_id, label_en, label_de, referrer, url])


def write_extraction_csv(path: str | Path, rows=DEMO_EXTRACTION_ROWS) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXTRACTION_COLUMNS)
        writer.writerows(rows)


def url_for(action_id: str, rng: random.Random) -> tuple[str, str]:
    """(url, referrer_url) that the named demo action's rule matches."""
    term = rng.choice(SEARCH_TERMS)
    rec = rng.randrange(1, 1_000_000)
    search_url = f"/search/results?lookfor={term}"
    record_url = f"/record/{rec}"
    if action_id == "view_record":
        return record_url, search_url
    if action_id == "view_abstract":
        return f"{record_url}?expand=abstract", record_url
    if action_id == "view_comments":
        return f"{record_url}?expand=comments", record_url
    if action_id == "simple_search_home":
        return search_url, HOMEPAGE
    if action_id == "simple_search":
        return search_url, record_url
    if action_id == "advanced_search":
        return f"/search/advanced?lookfor0={term}", search_url
    if action_id == "facet_filter":
        return f"{search_url}&filter[]=topic:{term}", search_url
    if action_id == "paginate":
        return f"{search_url}&page={rng.randrange(2, 20)}", search_url
    if action_id == "export_record":
        return f"{record_url}/export?style=bibtex", record_url
    if action_id == "add_favorite":
        return f"/favorites/add?id={rec}", record_url
    if action_id == "view_fulltext":
        return f"{record_url}/fulltext", record_url
    if action_id == "go_home":
        return HOMEPAGE, search_url
    raise ValueError(f"unknown demo action {action_id!r}")


def junk_url(rng: random.Random) -> tuple[str, str]:
    """A URL no demo rule matches."""
    return f"/static/asset{rng.randrange(1000)}.css", ""


def generate_demo_rows(
    n_sessions: int,
    seed: int = 0,
    junk_fraction: float = 0.1,
    logged_in_fraction: float = 0.4,
    min_len: int = 1,
    max_len: int = 12,
) -> list[LogRow]:
    """Plausible portal traffic: seeded sessions of demo-action rows.

    row_id is left 0; a store writer assigns real ids on append.
    """
    rng = random.Random(seed)
    rows: list[LogRow] = []
    for i in range(n_sessions):
        sid = f"s{i:05d}"
        user = f"u{rng.randrange(200):03d}" if rng.random() < logged_in_fraction else None
        login_at = rng.randrange(0, 3) if user else 0
        ts = BASE_TS + rng.randrange(0, 120 * 86_400_000)
        length = rng.randint(min_len, max_len)
        for k in range(length):
            if rng.random() < junk_fraction:
                url, referrer = junk_url(rng)
                action = None
            else:
                action = rng.choice(_MID_SESSION_ACTIONS)
                url, referrer = url_for(action, rng)
            ids = (
                [f"doc{rng.randrange(1_000_000)}" for _ in range(rng.randrange(1, 4))]
                if action in ("simple_search", "simple_search_home", "facet_filter")
                else []
            )
            rows.append(
                LogRow(
                    row_id=0,
                    session_id=sid,
                    user_id=user if (user and k >= login_at) else None,
                    timestamp=ts,
                    resultlist_ids=ids,
                    url=url,
                    referrer_url=referrer,
                )
            )
            ts += rng.randrange(500, 120_000)
    return rows


def fill_store(store_dir: str | Path, rows) -> LogStore:
    store = LogStore(store_dir)
    with store.writer() as w:
        for row in rows:
            w.append(row)
    return store


def seeded_start_rows(
    n_sessions: int,
    first_action: str = "view_record",
    first_fraction: float = 0.7,
    seed: int = 7,
    follow_weight: float = 0.4,
) -> tuple[list[LogRow], int]:
    """Sessions where an exact share starts with one action; returns the rows
    and the exact number of sessions seeded to start with it.

    First rows use single-match URLs only, so the seeded count survives the
    mapping stage untouched.
    """
    rng = random.Random(seed)
    seeded = int(n_sessions * first_fraction)
    other_starts = [a for a in SINGLE_MATCH_ACTIONS if a != first_action]
    rows: list[LogRow] = []
    for i in range(n_sessions):
        sid = f"f{i:05d}"
        ts = BASE_TS + rng.randrange(0, 30 * 86_400_000)
        start = first_action if i < seeded else rng.choice(other_starts)
        length = rng.randint(1, 10)
        for k in range(length):
            if k == 0:
                action = start
            elif rng.random() < follow_weight:
                action = first_action
            else:
                action = rng.choice(SINGLE_MATCH_ACTIONS)
            url, referrer = url_for(action, rng)
            rows.append(
                LogRow(0, sid, None, ts, [], url, referrer)
            )
            ts += rng.randrange(1_000, 60_000)
    return rows, seeded


# ---------------------------------------------------------------------------
# Benchmark-scale generation: many rules, many rows.
# ---------------------------------------------------------------------------


def benchmark_mapping_rows(n_rules: int) -> list[tuple[str, str, str, str, str]]:
    rows = []
    for i in range(n_rules):
        kind = i % 3
        if kind == 0:
            rows.append((f"a{i}_search", f"Search {i}", "", "", rf"/s{i}/results\?q="))
        elif kind == 1:
            rows.append((f"a{i}_view", f"View {i}", "", "", rf"/s{i}/item/\d+"))
        else:
            referrer = rf"/s{i - 1}/results\?" if i % 6 == 2 else ""
            rows.append((f"a{i}_export", f"Export {i}", "", referrer, rf"/s{i}/item/\d+/export"))
    return rows


BENCHMARK_EXTRACTION_ROWS = [
    ("*", "result_ids", "field", "resultlist_ids", ""),
    ("a0_search", "query", "text", "url", r"q=([^&]*)"),
    ("a3_search", "query", "text", "url", r"q=([^&]*)"),
    ("a1_view", "item_id", "text", "url", r"/item/(\d+)"),
]


def generate_benchmark_store(
    store_dir: str | Path,
    n_rows: int,
    n_rules: int = 50,
    seed: int = 42,
    session_len: int = 10,
    concurrency: int = 500,
) -> LogStore:
    """A large store whose URLs hit the benchmark rule set (plus some misses).

    Rows of concurrent sessions are interleaved the way real traffic arrives,
    so downstream sorting and grouping do honest work.
    """
    rng = random.Random(seed)
    store = LogStore(store_dir)
    active: list[list] = []  # [session_id, rows_left, next_ts]
    next_sess = 0
    with store.writer() as w:
        for _ in range(n_rows):
            if not active or (len(active) < concurrency and rng.random() < 0.2):
                active.append(
                    [f"b{next_sess:07d}", rng.randint(1, 2 * session_len), BASE_TS + rng.randrange(0, 120 * 86_400_000)]
                )
                next_sess += 1
            slot = rng.randrange(len(active))
            sid, rows_left, ts = active[slot]
            i = rng.randrange(n_rules + 5)  # the overflow indexes miss every rule
            kind = i % 3
            if i >= n_rules:
                url = f"/nowhere/{i}"
            elif kind == 0:
                url = f"/s{i}/results?q=term{rng.randrange(1000)}"
            elif kind == 1:
                url = f"/s{i}/item/{rng.randrange(100000)}"
            else:
                url = f"/s{i}/item/{rng.randrange(100000)}/export"
            referrer = f"/s{max(0, i - 1)}/results?q=prev" if rng.random() < 0.5 else ""
            ids = [f"d{rng.randrange(100000)}"] if kind == 0 and i < n_rules else []
            w.append(LogRow(0, sid, None, ts, ids, url, referrer))
            if rows_left <= 1:
                active.pop(slot)
            else:
                active[slot][1] = rows_left - 1
                active[slot][2] = ts + rng.randrange(1_000, 30_000)
    return store
