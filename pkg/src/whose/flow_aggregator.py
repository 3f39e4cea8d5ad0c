"""Per-step action counts and step-to-step transition counts behind the
Sankey overview.

Counting is exact and order-insensitive. Rows are ordered top to bottom by
total occurrence within the first eight steps; sessions running past the
horizon contribute their truncated prefix and are not counted as endings.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from whose.session_store import Session

DEFAULT_MAX_STEPS = 8


@dataclass
class FlowGraph:
    max_steps: int
    nodes: dict[tuple[int, str], int] = field(default_factory=dict)  # (step, action) -> count
    edges: dict[tuple[int, str, str], int] = field(default_factory=dict)  # (step, from, to) -> count
    endings: dict[int, int] = field(default_factory=dict)  # step -> sessions ending there
    action_order: list[str] = field(default_factory=list)
    session_total: int = 0


def aggregate(sessions: Iterable[Session], max_steps: int = DEFAULT_MAX_STEPS) -> FlowGraph:
    """Count nodes, transitions and endings over each session's first
    max_steps actions.

    Invariants (property-tested): step-1 node counts sum to session_total;
    for steps below the horizon, a node's count equals its outgoing edge
    counts plus the sessions ending on it; for steps >= 2 it equals the
    incoming edge counts.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    nodes: Counter = Counter()
    edges: Counter = Counter()
    endings: Counter = Counter()
    total = 0
    for s in sessions:
        total += 1
        prefix = s.actions[:max_steps]
        prev = None
        for step, act in enumerate(prefix, start=1):
            nodes[(step, act.action_id)] += 1
            if prev is not None:
                edges[(step - 1, prev, act.action_id)] += 1
            prev = act.action_id
        if s.action_count <= max_steps:
            endings[s.action_count] += 1
    # Ordering metric: total occurrences within the first eight steps (or the
    # whole horizon when it is shorter), ties by ascending action id.
    limit = min(DEFAULT_MAX_STEPS, max_steps)
    totals: Counter = Counter()
    for (step, action_id), count in nodes.items():
        if step <= limit:
            totals[action_id] += count
    all_actions = {action_id for (_, action_id) in nodes}
    order = sorted(all_actions, key=lambda a: (-totals[a], a))
    return FlowGraph(
        max_steps=max_steps,
        nodes=dict(nodes),
        edges=dict(edges),
        endings=dict(endings),
        action_order=order,
        session_total=total,
    )


def highlight_paths(flow: FlowGraph, action_id: str) -> FlowGraph:
    """The subgraph a hover highlight shows: everything reachable forward
    from the action's nodes, plus the direct predecessor edges feeding those
    nodes. Counts are copied unchanged; this is pure selection.
    """
    anchors = {key for key in flow.nodes if key[1] == action_id}
    if not anchors:
        return FlowGraph(max_steps=flow.max_steps, session_total=flow.session_total)

    by_source: dict[tuple[int, str], list[tuple[int, str, str]]] = {}
    for key in flow.edges:
        step, src, _dst = key
        by_source.setdefault((step, src), []).append(key)

    sel_nodes = set(anchors)
    sel_edges: set[tuple[int, str, str]] = set()
    frontier = list(anchors)
    while frontier:
        step, action = frontier.pop()
        for edge in by_source.get((step, action), ()):
            if edge in sel_edges:
                continue
            sel_edges.add(edge)
            nxt = (edge[0] + 1, edge[2])
            if nxt not in sel_nodes:
                sel_nodes.add(nxt)
                frontier.append(nxt)
    # One step of upstream context into the hovered action itself.
    for step, action in anchors:
        if step < 2:
            continue
        for edge in flow.edges:
            if edge[0] == step - 1 and edge[2] == action:
                sel_edges.add(edge)
                sel_nodes.add((edge[0], edge[1]))

    kept_actions = {a for (_, a) in sel_nodes}
    return FlowGraph(
        max_steps=flow.max_steps,
        nodes={k: flow.nodes[k] for k in sel_nodes},
        edges={k: flow.edges[k] for k in sel_edges},
        endings={},
        action_order=[a for a in flow.action_order if a in kept_actions],
        session_total=flow.session_total,
    )


def flow_to_json(flow: FlowGraph) -> dict:
    """Canonical wire shape; element order is fixed so encodings are stable."""
    return {
        "max_steps": flow.max_steps,
        "session_total": flow.session_total,
        "action_order": list(flow.action_order),
        "nodes": [
            {"step": step, "action_id": action_id, "count": flow.nodes[(step, action_id)]}
            for step, action_id in sorted(flow.nodes)
        ],
        "edges": [
            {
                "step": step,
                "from_action_id": src,
                "to_action_id": dst,
                "count": flow.edges[(step, src, dst)],
            }
            for step, src, dst in sorted(flow.edges)
        ],
        "endings": {str(step): flow.endings[step] for step in sorted(flow.endings)},
    }


def flow_from_json(obj: dict) -> FlowGraph:
    return FlowGraph(
        max_steps=obj["max_steps"],
        nodes={(n["step"], n["action_id"]): n["count"] for n in obj["nodes"]},
        edges={(e["step"], e["from_action_id"], e["to_action_id"]): e["count"] for e in obj["edges"]},
        endings={int(k): v for k, v in obj["endings"].items()},
        action_order=list(obj["action_order"]),
        session_total=obj["session_total"],
    )


def encode_flow(flow: FlowGraph) -> bytes:
    """Byte-stable JSON encoding shared by the HTTP API and the export CLI."""
    return json.dumps(flow_to_json(flow), separators=(",", ":"), ensure_ascii=False).encode("utf-8")
