"""whose: whole-session analysis of interaction logs from web-based retrieval systems.

Pipeline: ingest raw logs into a row store, map rows to typed user actions via
an editable regex rule table, group actions into sessions with computed
durations, then query the result through combinable filters and per-step flow
aggregates (the data behind a Sankey overview).
"""

from whose.ingestion import (
    IngestReport,
    LogRow,
    LogStore,
    SchemaConfig,
    ingest_file,
    parse_log_record,
)
from whose.mapping_engine import (
    UNMATCHED_ACTION,
    ActionInstance,
    AnalysisTable,
    ExtractionRule,
    MappingRule,
    extract_entities,
    load_extraction_table,
    load_mapping_table,
    match_row,
    preprocess,
)
from whose.session_store import Session, SessionStore, build_sessions, load, persist
from whose.filter_engine import (
    FilterSpec,
    FilterValidationError,
    TimeRange,
    apply_filters,
    resolve_time_range,
    session_matches,
)
from whose.flow_aggregator import FlowGraph, aggregate, highlight_paths

__all__ = [
    "ActionInstance",
    "AnalysisTable",
    "ExtractionRule",
    "FilterSpec",
    "FilterValidationError",
    "FlowGraph",
    "IngestReport",
    "LogRow",
    "LogStore",
    "MappingRule",
    "SchemaConfig",
    "Session",
    "SessionStore",
    "TimeRange",
    "UNMATCHED_ACTION",
    "aggregate",
    "apply_filters",
    "build_sessions",
    "extract_entities",
    "highlight_paths",
    "ingest_file",
    "load",
    "load_extraction_table",
    "load_mapping_table",
    "match_row",
    "parse_log_record",
    "persist",
    "preprocess",
    "resolve_time_range",
    "session_matches",
]
