from __future__ import annotations

import json
import os
import signal
import socket
import subprocess
import sys
import time
import urllib.request

import pytest
from fastapi.testclient import TestClient

from whose.api_service import create_app
from whose.cli import main
from whose.ingestion import LogStore
from whose.session_store import SessionStore, load
from whose.synthetic import (
    fill_store,
    generate_demo_rows,
    write_extraction_csv,
    write_mapping_csv,
)


@pytest.fixture
def pipeline_dir(tmp_path):
    """mapping/extraction CSVs plus an ingested row store."""
    write_mapping_csv(tmp_path / "mapping.csv")
    write_extraction_csv(tmp_path / "extraction.csv")
    fill_store(tmp_path / "store", generate_demo_rows(60, seed=21))
    return tmp_path


def write_schema(tmp_path):
    schema = tmp_path / "schema.json"
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
                }
            }
        )
    )
    return schema


def test_ingest_reports_counts(tmp_path, capsys):
    schema = write_schema(tmp_path)
    log = tmp_path / "log.csv"
    log.write_text(
        "session_id,user_id,timestamp,resultlist_ids,url,referrer_url\n"
        "s1,,2014-05-01T10:00:00Z,,/a,\n"
        ",,2014-05-01T10:01:00Z,,/b,\n"
        "s2,,2014-05-01T10:02:00Z,,/c,\n"
    )
    code = main(["ingest", "--log", str(log), "--format", "csv", "--schema", str(schema), "--store", str(tmp_path / "store")])
    out = capsys.readouterr().out
    assert code == 0
    assert "accepted: 2" in out
    assert "rejected: 1" in out
    assert "missing_session_id" in out
    assert len(LogStore(tmp_path / "store")) == 2


def test_ingest_missing_file_exit_1(tmp_path, capsys):
    schema = write_schema(tmp_path)
    code = main(["ingest", "--log", str(tmp_path / "nope.csv"), "--format", "csv", "--schema", str(schema), "--store", str(tmp_path / "store")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_missing_required_flag_exit_1(capsys):
    assert main(["ingest", "--format", "csv"]) == 1


def test_validate_mapping_ok(pipeline_dir, capsys):
    code = main(
        [
            "validate-mapping",
            "--mapping",
            str(pipeline_dir / "mapping.csv"),
            "--extraction",
            str(pipeline_dir / "extraction.csv"),
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "mapping rules: 12 compiled" in out


def test_validate_mapping_bad_pattern_names_row(tmp_path, capsys):
    bad = tmp_path / "mapping.csv"
    bad.write_text(
        "rule_order,action_id,label_en,label_de,referrer_param,url_param\n"
        '0,ok,Ok,,,/fine\n'
        '1,broken,Broken,,,([\n'
    )
    write_extraction_csv(tmp_path / "extraction.csv")
    code = main(["validate-mapping", "--mapping", str(bad), "--extraction", str(tmp_path / "extraction.csv")])
    err = capsys.readouterr().err
    assert code == 1
    assert "row 2" in err


def test_validate_mapping_coverage_matches_reference(pipeline_dir, capsys):
    code = main(
        [
            "validate-mapping",
            "--mapping",
            str(pipeline_dir / "mapping.csv"),
            "--extraction",
            str(pipeline_dir / "extraction.csv"),
            "--sample",
            str(pipeline_dir / "store"),
        ]
    )
    out = capsys.readouterr().out
    assert code == 0

    # reference scan: a row is covered when any rule matches it
    import oracle

    rules = oracle.read_mapping(pipeline_dir / "mapping.csv")
    rows = list(LogStore(pipeline_dir / "store", create=False))
    matched = sum(
        1
        for row in rows
        if any(
            r["url_re"].search(row.url)
            and (r["ref_re"] is None or r["ref_re"].search(row.referrer_url))
            for r in rules
        )
    )
    expected = f"coverage: {matched / len(rows) * 100.0:.1f}% ({matched}/{len(rows)} rows matched)"
    assert expected in out
    assert "rule 0 view_record:" in out


def test_preprocess_threads_byte_identical(pipeline_dir, capsys):
    outs = []
    for threads in ("1", "8"):
        out_path = pipeline_dir / f"analysis-{threads}.jsonl"
        code = main(
            [
                "preprocess",
                "--store",
                str(pipeline_dir / "store"),
                "--mapping",
                str(pipeline_dir / "mapping.csv"),
                "--extraction",
                str(pipeline_dir / "extraction.csv"),
                "--threads",
                threads,
                "--out",
                str(out_path),
            ]
        )
        assert code == 0
        outs.append(out_path.read_bytes())
    assert outs[0] == outs[1]
    assert "rows/sec" in capsys.readouterr().out


def test_preprocess_empty_store_writes_valid_file(tmp_path, capsys):
    LogStore(tmp_path / "store")  # init empty
    write_mapping_csv(tmp_path / "mapping.csv")
    write_extraction_csv(tmp_path / "extraction.csv")
    out_path = tmp_path / "analysis.jsonl"
    code = main(
        [
            "preprocess",
            "--store",
            str(tmp_path / "store"),
            "--mapping",
            str(tmp_path / "mapping.csv"),
            "--extraction",
            str(tmp_path / "extraction.csv"),
            "--out",
            str(out_path),
        ]
    )
    assert code == 0
    assert len(load(out_path)) == 0


def make_analysis(pipeline_dir) -> str:
    out_path = pipeline_dir / "analysis.jsonl"
    assert (
        main(
            [
                "preprocess",
                "--store",
                str(pipeline_dir / "store"),
                "--mapping",
                str(pipeline_dir / "mapping.csv"),
                "--extraction",
                str(pipeline_dir / "extraction.csv"),
                "--out",
                str(out_path),
            ]
        )
        == 0
    )
    return str(out_path)


def test_export_flow_equals_api_body(pipeline_dir, capsys):
    analysis = make_analysis(pipeline_dir)
    filter_json = '{"logged_in_only": true}'
    out_path = pipeline_dir / "flow.json"
    code = main(
        [
            "export-flow",
            "--store",
            analysis,
            "--filter",
            filter_json,
            "--max-steps",
            "6",
            "--out",
            str(out_path),
        ]
    )
    assert code == 0
    client = TestClient(create_app(SessionStore.load(analysis)))
    resp = client.post("/api/flow", json={"filter": json.loads(filter_json), "max_steps": 6})
    assert out_path.read_bytes() == resp.content


def test_export_flow_default_max_steps_is_eight(pipeline_dir, capsys):
    analysis = make_analysis(pipeline_dir)
    out_path = pipeline_dir / "flow.json"
    assert main(["export-flow", "--store", analysis, "--out", str(out_path)]) == 0
    assert json.loads(out_path.read_text())["max_steps"] == 8


def test_export_flow_invalid_filter_json_exit_1(pipeline_dir, capsys):
    analysis = make_analysis(pipeline_dir)
    code = main(["export-flow", "--store", analysis, "--filter", "{nope", "--out", str(pipeline_dir / "x")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_export_flow_unknown_filter_key_exit_1(pipeline_dir, capsys):
    analysis = make_analysis(pipeline_dir)
    code = main(["export-flow", "--store", analysis, "--filter", '{"bogus": 1}', "--out", str(pipeline_dir / "x")])
    assert code == 1


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _wait_for(url: str, proc, timeout: float = 15.0) -> bytes:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            raise AssertionError(f"server exited early: {proc.returncode}")
        try:
            with urllib.request.urlopen(url, timeout=1) as resp:
                return resp.read()
        except OSError:
            time.sleep(0.1)
    raise AssertionError("server did not come up")


def test_serve_answers_and_shuts_down_cleanly(pipeline_dir):
    analysis = make_analysis(pipeline_dir)
    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "whose", "serve", "--store", analysis, "--port", str(port)],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
    )
    try:
        body = _wait_for(f"http://127.0.0.1:{port}/api/actions", proc)
        actions = json.loads(body)
        assert actions[-1]["action_id"] == "__unmatched__"
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=15) == 0
    finally:
        if proc.poll() is None:
            proc.kill()


def test_serve_env_overrides(pipeline_dir):
    analysis = make_analysis(pipeline_dir)
    port = _free_port()
    env = dict(os.environ, WHOSE_STORE=analysis, WHOSE_PORT=str(port))
    proc = subprocess.Popen(
        [sys.executable, "-m", "whose", "serve"],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        env=env,
    )
    try:
        _wait_for(f"http://127.0.0.1:{port}/api/actions", proc)
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=15) == 0
    finally:
        if proc.poll() is None:
            proc.kill()


def test_serve_bad_port_env_exit_1(pipeline_dir, monkeypatch, capsys):
    analysis = make_analysis(pipeline_dir)
    monkeypatch.setenv("WHOSE_STORE", analysis)
    monkeypatch.setenv("WHOSE_PORT", "not-a-port")
    assert main(["serve"]) == 1
    assert "WHOSE_PORT" in capsys.readouterr().err


def test_serve_bad_store_exit_1(tmp_path):
    bad = tmp_path / "not-analysis.jsonl"
    bad.write_text("junk\n")
    proc = subprocess.run(
        [sys.executable, "-m", "whose", "serve", "--store", str(bad), "--port", "1"],
        capture_output=True,
        text=True,
        timeout=30,
    )
    assert proc.returncode == 1
    assert "error:" in proc.stderr
