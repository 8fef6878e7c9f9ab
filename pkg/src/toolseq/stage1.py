"""Stage 1: hybrid graph-semantic candidate retrieval.

Retrieval first over-fetches a semantic pool (a small multiple of the
evaluation budget), then repairs connectivity: if the pool's induced
transition subgraph splits into several weakly connected components, short
paths in the full graph are searched between the most query-similar node of
the largest component and of each smaller one, and up to ``max_bridges``
interior path tools are pulled in. A greedy pass then sequences candidates
by blending the local transition weight from the previously placed tool, the
query similarity, and a positional prior bonus; an edge that exists only in
the reverse direction contributes half its weight. The greedy order is kept
for audit, truncated to the evaluation budget, and padded from the remaining
universe by similarity when the pool runs short.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingStore, top_k_semantic
from .errors import EmptyLibrary, InvalidArgument, MissingEmbedding
from .graph import TransitionGraph
from .trajectory import ToolId


@dataclass(frozen=True)
class RetrievalConfig:
    pool_multiplier: int = 3
    alpha: float = 0.5
    gamma: float = 0.1
    max_bridges: int = 2
    bridge_path_limit: int = 3

    def __post_init__(self) -> None:
        if self.pool_multiplier < 1:
            raise InvalidArgument("pool_multiplier must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument("alpha must be in [0, 1]")
        if self.gamma < 0.0:
            raise InvalidArgument("gamma must be >= 0")
        if self.max_bridges < 0 or self.bridge_path_limit < 1:
            raise InvalidArgument("bridge limits out of range")


@dataclass
class CandidateSet:
    """Stage-1 output: an ordered candidate list with its semantic scores."""

    tools: list[ToolId]
    semantic_scores: dict[ToolId, float]
    k_eval: int
    provisional: list[ToolId] = field(default_factory=list)


def position_bonus(g: TransitionGraph, tool: ToolId, p: float) -> float:
    """Closeness of a target slot p to the tool's positional prior; 0 if unseen."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument("p must be in [0, 1]")
    mean = g.position_mean.get(tool)
    if mean is None:
        return 0.0
    return 1.0 - abs(p - mean)


def weak_components(g: TransitionGraph, members: list[ToolId]) -> list[set[ToolId]]:
    """Weakly connected components of the subgraph induced on ``members``."""
    member_set = set(members)
    seen: set[ToolId] = set()
    components: list[set[ToolId]] = []
    for start in sorted(member_set, key=lambda t: t.encode("utf-8")):
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        seen.add(start)
        while queue:
            cur = queue.popleft()
            neighbors = set(g.out_edges(cur)) | set(g.in_edges(cur))
            for nxt in sorted(neighbors & member_set, key=lambda t: t.encode("utf-8")):
                if nxt not in seen:
                    seen.add(nxt)
                    comp.add(nxt)
                    queue.append(nxt)
        components.append(comp)
    return components


def _bfs_path(
    g: TransitionGraph, src: ToolId, dst: ToolId, max_edges: int
) -> list[ToolId] | None:
    """Shortest undirected path src..dst in the full graph, depth-limited."""
    if src == dst:
        return [src]
    parent: dict[ToolId, ToolId] = {src: src}
    frontier = deque([(src, 0)])
    while frontier:
        cur, depth = frontier.popleft()
        if depth == max_edges:
            continue
        neighbors = set(g.out_edges(cur)) | set(g.in_edges(cur))
        for nxt in sorted(neighbors, key=lambda t: t.encode("utf-8")):
            if nxt in parent:
                continue
            parent[nxt] = cur
            if nxt == dst:
                path = [dst]
                while path[-1] != src:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            frontier.append((nxt, depth + 1))
    return None


def _local_weight(
    g: TransitionGraph, members: set[ToolId], a: ToolId, b: ToolId
) -> float:
    """Forward weight within the candidate subgraph; half weight if only the
    reverse edge exists."""
    if a not in members or b not in members:
        return 0.0
    w = g.edge_weights.get((a, b))
    if w is not None:
        return w
    rev = g.edge_weights.get((b, a))
    if rev is not None:
        return rev / 2.0
    return 0.0


def gs_hybrid_retrieve(
    g: TransitionGraph,
    store: EmbeddingStore,
    query_vec: np.ndarray,
    k_eval: int,
    config: RetrievalConfig | None = None,
) -> CandidateSet:
    """Retrieve and provisionally order k_eval candidate tools for a query."""
    cfg = config or RetrievalConfig()
    if k_eval < 1:
        raise InvalidArgument("k_eval must be >= 1")
    if len(store) == 0:
        raise EmptyLibrary("embedding store is empty")

    universe = store.tools()
    ranked = top_k_semantic(store, query_vec, len(universe))
    scores = dict(ranked)

    k_pool = max(k_eval + 2, cfg.pool_multiplier * k_eval)
    candidates: list[ToolId] = [t for t, _ in ranked[:k_pool]]
    candidate_set = set(candidates)

    def sim(tool: ToolId) -> float:
        try:
            return scores[tool]
        except KeyError:
            raise MissingEmbedding(tool) from None

    # Bridge disconnected pool components through the full graph.
    in_graph = [t for t in candidates if t in g.nodes]
    components = weak_components(g, in_graph)
    if len(components) > 1 and cfg.max_bridges > 0:
        components.sort(
            key=lambda comp: (-len(comp), min(t.encode("utf-8") for t in comp))
        )

        def representative(comp: set[ToolId]) -> ToolId:
            return min(comp, key=lambda t: (-sim(t), t.encode("utf-8")))

        hub_rep = representative(components[0])
        budget = cfg.max_bridges
        for comp in components[1:]:
            if budget <= 0:
                break
            path = _bfs_path(g, hub_rep, representative(comp), cfg.bridge_path_limit)
            if path is None:
                continue
            interior = [t for t in path[1:-1] if t not in candidate_set]
            if len(interior) > budget:
                continue
            for t in interior:
                sim(t)  # store must cover bridge tools
                candidates.append(t)
                candidate_set.add(t)
            budget -= len(interior)

    # Greedy provisional sequencing by blended transition/semantic/position
    # score; only the first k_eval picks matter downstream.
    picked: list[ToolId] = []
    picked_set: set[ToolId] = set()
    ordered_pool = sorted(candidates, key=lambda t: t.encode("utf-8"))
    steps = min(k_eval, len(candidates))
    for _ in range(steps):
        best: ToolId | None = None
        best_score = -float("inf")
        if not picked:
            for t in ordered_pool:
                s = sim(t)
                if s > best_score:
                    best, best_score = t, s
        else:
            cur = picked[-1]
            p = len(picked) / (k_eval - 1) if k_eval > 1 else 0.0
            for t in ordered_pool:
                if t in picked_set:
                    continue
                s = (
                    cfg.alpha * _local_weight(g, candidate_set, cur, t)
                    + (1.0 - cfg.alpha) * sim(t)
                    + cfg.gamma * position_bonus(g, t, p)
                )
                if s > best_score:
                    best, best_score = t, s
        assert best is not None
        picked.append(best)
        picked_set.add(best)

    provisional = list(picked)

    # Pad from the full universe by similarity when the pool ran short.
    if len(picked) < k_eval:
        for t, _ in ranked:
            if len(picked) >= k_eval:
                break
            if t not in picked_set:
                picked.append(t)
                picked_set.add(t)

    return CandidateSet(
        tools=picked,
        semantic_scores={t: sim(t) for t in picked},
        k_eval=k_eval,
        provisional=provisional,
    )
