from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from whose.mapping_engine import action_catalog, load_extraction_table, load_mapping_table, preprocess
from whose.session_store import SessionStore, build_sessions
from whose.synthetic import fill_store, generate_demo_rows, write_extraction_csv, write_mapping_csv


@pytest.fixture(scope="session")
def demo_tables(tmp_path_factory):
    """Paths of the demo mapping/extraction CSVs."""
    root = tmp_path_factory.mktemp("tables")
    mapping = root / "mapping.csv"
    extraction = root / "extraction.csv"
    write_mapping_csv(mapping)
    write_extraction_csv(extraction)
    return mapping, extraction


@pytest.fixture(scope="session")
def demo_rules(demo_tables):
    mapping, extraction = demo_tables
    return load_mapping_table(mapping), load_extraction_table(extraction)


@pytest.fixture(scope="session")
def demo_store(tmp_path_factory):
    """A 200-session synthetic row store."""
    root = tmp_path_factory.mktemp("rows")
    return fill_store(root / "store", generate_demo_rows(200, seed=11))


@pytest.fixture(scope="session")
def demo_sessions(demo_store, demo_rules):
    mapping_rules, extraction_rules = demo_rules
    table = preprocess(demo_store, mapping_rules, extraction_rules)
    return build_sessions(table)


@pytest.fixture(scope="session")
def demo_session_store(demo_sessions, demo_rules):
    mapping_rules, _ = demo_rules
    return SessionStore(demo_sessions, catalog=action_catalog(mapping_rules))
