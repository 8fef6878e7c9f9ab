"""The execution-transition graph mined from trajectory corpora.

Nodes are tools. A directed edge (a, b) counts how often b was invoked
immediately after a across the corpus; weights are the counts normalized per
source tool, so every out-degree-positive row of the implied transition
matrix sums to one. Self-loops are excluded (deduplicated trajectories cannot
produce them, and a tool following itself carries no sequencing signal).

Each node also carries a positional prior: the mean of its normalized
positions i/(L-1) over the trajectories that mention it. A single-tool
trajectory pins its tool to the middle of the unit interval (0.5) rather
than claiming it starts or ends workflows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO

from .errors import EmptyDataset, FormatError, IntegrityError
from .trajectory import ToolId, TrajectoryDataset

FORMAT_VERSION = 1
WEIGHT_SUM_TOLERANCE = 1e-6


@dataclass
class TransitionGraph:
    nodes: set[ToolId] = field(default_factory=set)
    edge_counts: dict[tuple[ToolId, ToolId], int] = field(default_factory=dict)
    edge_weights: dict[tuple[ToolId, ToolId], float] = field(default_factory=dict)
    position_mean: dict[ToolId, float] = field(default_factory=dict)
    position_count: dict[ToolId, int] = field(default_factory=dict)
    # Adjacency indexes derived from edge_weights; rebuilt on construction.
    _out: dict[ToolId, dict[ToolId, float]] = field(default_factory=dict, repr=False)
    _in: dict[ToolId, dict[ToolId, float]] = field(default_factory=dict, repr=False)

    def reindex(self) -> None:
        self._out = {}
        self._in = {}
        for (a, b), w in self.edge_weights.items():
            self._out.setdefault(a, {})[b] = w
            self._in.setdefault(b, {})[a] = w

    def out_edges(self, tool: ToolId) -> dict[ToolId, float]:
        return self._out.get(tool, {})

    def in_edges(self, tool: ToolId) -> dict[ToolId, float]:
        return self._in.get(tool, {})

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edge_weights)


def build_graph(ds: TrajectoryDataset) -> TransitionGraph:
    """Mine the transition graph from a trajectory dataset."""
    if not ds.trajectories:
        raise EmptyDataset("cannot build a graph from an empty dataset")
    counts: dict[tuple[ToolId, ToolId], int] = {}
    pos_sum: dict[ToolId, float] = {}
    pos_n: dict[ToolId, int] = {}
    nodes: set[ToolId] = set()
    for tr in ds.trajectories:
        tools = tr.tools
        L = len(tools)
        nodes.update(tools)
        for i, t in enumerate(tools):
            p = i / (L - 1) if L >= 2 else 0.5
            pos_sum[t] = pos_sum.get(t, 0.0) + p
            pos_n[t] = pos_n.get(t, 0) + 1
        for a, b in zip(tools, tools[1:]):
            if a == b:
                continue
            counts[(a, b)] = counts.get((a, b), 0) + 1

    out_totals: dict[ToolId, int] = {}
    for (a, _), c in counts.items():
        out_totals[a] = out_totals.get(a, 0) + c
    weights = {(a, b): c / out_totals[a] for (a, b), c in counts.items()}

    g = TransitionGraph(
        nodes=nodes,
        edge_counts=counts,
        edge_weights=weights,
        position_mean={t: pos_sum[t] / pos_n[t] for t in pos_sum},
        position_count=dict(pos_n),
    )
    g.reindex()
    return g


def transition_weight(g: TransitionGraph, a: ToolId, b: ToolId) -> float:
    """Normalized transition weight w(a, b); 0.0 for absent edges and a == b."""
    if a == b:
        return 0.0
    return g.edge_weights.get((a, b), 0.0)


def serialize_graph(g: TransitionGraph, stream: IO[str]) -> None:
    """Write the graph as a single JSON document with full-precision weights."""
    payload = {
        "format_version": FORMAT_VERSION,
        "nodes": sorted(g.nodes),
        "edges": [
            {"src": a, "dst": b, "count": g.edge_counts[(a, b)], "weight": w}
            for (a, b), w in sorted(g.edge_weights.items())
        ],
        "positions": [
            {"tool": t, "mean": g.position_mean[t], "count": g.position_count[t]}
            for t in sorted(g.position_mean)
        ],
    }
    json.dump(payload, stream)


def deserialize_graph(stream: IO[str] | str) -> TransitionGraph:
    """Load a serialized graph, re-validating structural invariants.

    Structural problems (missing keys, wrong types, unknown endpoints) raise
    FormatError; weight rows that no longer sum to one raise IntegrityError.
    """
    text = stream if isinstance(stream, str) else stream.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise FormatError("graph payload must be a JSON object")
    if payload.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"unsupported format_version {payload.get('format_version')!r}"
        )
    for key in ("nodes", "edges", "positions"):
        if key not in payload or not isinstance(payload[key], list):
            raise FormatError(f"missing or invalid {key!r} array")

    nodes: set[ToolId] = set()
    for n in payload["nodes"]:
        if not isinstance(n, str) or not n:
            raise FormatError("node ids must be non-empty strings")
        nodes.add(n)

    counts: dict[tuple[ToolId, ToolId], int] = {}
    weights: dict[tuple[ToolId, ToolId], float] = {}
    for e in payload["edges"]:
        if not isinstance(e, dict) or not {"src", "dst", "count", "weight"} <= set(e):
            raise FormatError("edge records need src, dst, count, weight")
        a, b, c, w = e["src"], e["dst"], e["count"], e["weight"]
        if not (isinstance(a, str) and isinstance(b, str)):
            raise FormatError("edge endpoints must be strings")
        if a not in nodes or b not in nodes:
            raise FormatError(f"edge endpoint {a!r} or {b!r} not in nodes")
        if a == b:
            raise FormatError(f"self-loop on {a!r}")
        if not isinstance(c, int) or isinstance(c, bool) or c < 1:
            raise FormatError("edge count must be a positive integer")
        if not isinstance(w, (int, float)) or isinstance(w, bool):
            raise FormatError("edge weight must be a number")
        if (a, b) in weights:
            raise FormatError(f"duplicate edge ({a!r}, {b!r})")
        counts[(a, b)] = c
        weights[(a, b)] = float(w)

    row_sums: dict[ToolId, float] = {}
    for (a, _), w in weights.items():
        row_sums[a] = row_sums.get(a, 0.0) + w
    for a, s in row_sums.items():
        if abs(s - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise IntegrityError(f"out-weights of {a!r} sum to {s!r}, expected 1")

    pos_mean: dict[ToolId, float] = {}
    pos_count: dict[ToolId, int] = {}
    for p in payload["positions"]:
        if not isinstance(p, dict) or not {"tool", "mean", "count"} <= set(p):
            raise FormatError("position records need tool, mean, count")
        t, m, c = p["tool"], p["mean"], p["count"]
        if not isinstance(t, str) or t not in nodes:
            raise FormatError(f"position for unknown tool {t!r}")
        if not isinstance(m, (int, float)) or isinstance(m, bool):
            raise FormatError("position mean must be a number")
        if not isinstance(c, int) or isinstance(c, bool) or c < 1:
            raise FormatError("position count must be a positive integer")
        if not 0.0 <= float(m) <= 1.0:
            raise IntegrityError(f"position mean of {t!r} outside [0, 1]")
        pos_mean[t] = float(m)
        pos_count[t] = c

    g = TransitionGraph(
        nodes=nodes,
        edge_counts=counts,
        edge_weights=weights,
        position_mean=pos_mean,
        position_count=pos_count,
    )
    g.reindex()
    return g
