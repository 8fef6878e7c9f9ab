"""Community structure of the transition graph and label agreement scores.

The directed graph is first projected to an undirected one (each unordered
pair weighted by the mean of the two directed weights), then partitioned by
Louvain modularity maximization. The implementation is deliberately local:
determinism demands a fixed node-visit order (shuffled once per level by the
seed, then swept in that order until quiescent), which off-the-shelf
implementations do not guarantee.

Agreement between a partition and a reference labeling is reported as purity
(per-community dominant-label fraction, averaged unweighted) and NMI with
arithmetic-mean normalization. Complementarity between graph weights and
embedding similarity is a Spearman correlation over directed edges.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .embeddings import EmbeddingStore
from .errors import InvalidArgument, MissingLabel
from .graph import TransitionGraph
from .trajectory import ToolId

_GAIN_EPS = 1e-12


@dataclass
class UndirectedGraph:
    """Symmetric weighted graph; isolated nodes are kept."""

    nodes: set[ToolId] = field(default_factory=set)
    weights: dict[tuple[ToolId, ToolId], float] = field(default_factory=dict)

    def total_weight(self) -> float:
        return sum(self.weights.values())


@dataclass(frozen=True)
class Partition:
    """Node-to-community assignment with contiguous indices from 0."""

    assignment: dict[ToolId, int]
    community_count: int

    def communities(self) -> list[set[ToolId]]:
        groups: list[set[ToolId]] = [set() for _ in range(self.community_count)]
        for node, c in self.assignment.items():
            groups[c].add(node)
        return groups


def undirected_projection(g: TransitionGraph) -> UndirectedGraph:
    """Symmetrize directed weights: each pair gets (w(a,b) + w(b,a)) / 2."""
    weights: dict[tuple[ToolId, ToolId], float] = {}
    for (a, b), w in g.edge_weights.items():
        key = (a, b) if a < b else (b, a)
        weights[key] = weights.get(key, 0.0) + w / 2.0
    return UndirectedGraph(nodes=set(g.nodes), weights=weights)


def _relabel_contiguous(raw: dict[ToolId, int]) -> Partition:
    mapping: dict[int, int] = {}
    assignment: dict[ToolId, int] = {}
    for node in sorted(raw, key=lambda t: t.encode("utf-8")):
        c = raw[node]
        if c not in mapping:
            mapping[c] = len(mapping)
        assignment[node] = mapping[c]
    return Partition(assignment=assignment, community_count=len(mapping))


def louvain(ug: UndirectedGraph, seed: int = 0, resolution: float = 1.0) -> Partition:
    """Deterministic Louvain partition of an undirected weighted graph.

    Starts from singletons and applies only strictly improving moves, so the
    result's modularity never falls below the singleton partition's.
    """
    nodes = sorted(ug.nodes, key=lambda t: t.encode("utf-8"))
    if not nodes:
        return Partition(assignment={}, community_count=0)
    index = {t: i for i, t in enumerate(nodes)}

    # Level-local structures: adjacency among current super-nodes plus
    # self-loop weight holding each super-node's internal mass.
    adj: list[dict[int, float]] = [{} for _ in nodes]
    loops = [0.0 for _ in nodes]
    for (a, b), w in ug.weights.items():
        ia, ib = index[a], index[b]
        adj[ia][ib] = adj[ia].get(ib, 0.0) + w
        adj[ib][ia] = adj[ib].get(ia, 0.0) + w
    # membership[i] = original nodes inside super-node i
    membership: list[list[ToolId]] = [[t] for t in nodes]

    rng = random.Random(seed)
    final: dict[ToolId, int] = {t: index[t] for t in nodes}

    while True:
        n = len(adj)
        degree = [sum(adj[i].values()) + 2.0 * loops[i] for i in range(n)]
        m2 = sum(degree)
        if m2 == 0.0:
            break
        m = m2 / 2.0
        community = list(range(n))
        sigma_tot = degree[:]

        order = list(range(n))
        rng.shuffle(order)

        moved_any = False
        while True:
            moved_this_sweep = False
            for i in order:
                d = community[i]
                k_i = degree[i]
                # Weight from i to each neighboring community.
                links: dict[int, float] = {}
                for j, w in adj[i].items():
                    links[community[j]] = links.get(community[j], 0.0) + w
                l_own = links.get(d, 0.0)
                remove_gain = -(
                    l_own / m
                    - resolution * (sigma_tot[d] - k_i) * k_i / (2.0 * m * m)
                )
                best_c, best_gain = d, 0.0
                for c in sorted(links):
                    if c == d:
                        continue
                    gain = remove_gain + (
                        links[c] / m
                        - resolution * sigma_tot[c] * k_i / (2.0 * m * m)
                    )
                    if gain > best_gain + _GAIN_EPS:
                        best_gain, best_c = gain, c
                if best_c != d:
                    sigma_tot[d] -= k_i
                    sigma_tot[best_c] += k_i
                    community[i] = best_c
                    moved_this_sweep = True
                    moved_any = True
            if not moved_this_sweep:
                break

        if not moved_any:
            break

        # Aggregate communities into the next level's super-nodes.
        labels = sorted(set(community))
        remap = {c: i for i, c in enumerate(labels)}
        new_n = len(labels)
        new_adj: list[dict[int, float]] = [{} for _ in range(new_n)]
        new_loops = [0.0 for _ in range(new_n)]
        new_membership: list[list[ToolId]] = [[] for _ in range(new_n)]
        for i in range(n):
            ci = remap[community[i]]
            new_loops[ci] += loops[i]
            new_membership[ci].extend(membership[i])
            for j, w in adj[i].items():
                cj = remap[community[j]]
                if ci == cj:
                    if i < j:
                        new_loops[ci] += w
                else:
                    new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
        adj, loops, membership = new_adj, new_loops, new_membership
        for ci, members in enumerate(membership):
            for t in members:
                final[t] = ci
        if new_n == n:
            break

    return _relabel_contiguous(final)


def modularity(
    ug: UndirectedGraph, partition: Partition, resolution: float = 1.0
) -> float:
    """Weighted Newman modularity of a partition; 0.0 for edgeless graphs."""
    if set(partition.assignment) != set(ug.nodes):
        raise InvalidArgument("partition must cover exactly the graph's nodes")
    m = ug.total_weight()
    if m == 0.0:
        return 0.0
    internal = [0.0] * partition.community_count
    degree_sum = [0.0] * partition.community_count
    deg: dict[ToolId, float] = {t: 0.0 for t in ug.nodes}
    for (a, b), w in ug.weights.items():
        deg[a] += w
        deg[b] += w
        if partition.assignment[a] == partition.assignment[b]:
            internal[partition.assignment[a]] += w
    for t, c in partition.assignment.items():
        degree_sum[c] += deg[t]
    q = 0.0
    for c in range(partition.community_count):
        q += internal[c] / m - resolution * (degree_sum[c] / (2.0 * m)) ** 2
    return q


def purity(partition: Partition, labels: dict[ToolId, str]) -> tuple[float, list[float]]:
    """Unweighted mean of per-community dominant-label fractions."""
    per_community: list[float] = []
    for members in partition.communities():
        counts: dict[str, int] = {}
        for t in sorted(members):
            if t not in labels:
                raise MissingLabel(t)
            counts[labels[t]] = counts.get(labels[t], 0) + 1
        per_community.append(max(counts.values()) / len(members))
    if not per_community:
        raise InvalidArgument("partition has no communities")
    return sum(per_community) / len(per_community), per_community


def nmi(partition: Partition, labels: dict[ToolId, str]) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Degenerate case: when both sides are single-cluster their entropies are
    zero and the groupings are identical, which scores 1.0.
    """
    nodes = sorted(partition.assignment)
    for t in nodes:
        if t not in labels:
            raise MissingLabel(t)
    n = len(nodes)
    if n == 0:
        raise InvalidArgument("partition is empty")
    joint: dict[tuple[int, str], int] = {}
    c_counts: dict[int, int] = {}
    l_counts: dict[str, int] = {}
    for t in nodes:
        c = partition.assignment[t]
        lab = labels[t]
        joint[(c, lab)] = joint.get((c, lab), 0) + 1
        c_counts[c] = c_counts.get(c, 0) + 1
        l_counts[lab] = l_counts.get(lab, 0) + 1

    def entropy(counts: dict) -> float:
        h = 0.0
        for v in counts.values():
            p = v / n
            h -= p * math.log(p)
        return h

    h_c = entropy(c_counts)
    h_l = entropy(l_counts)
    if h_c == 0.0 and h_l == 0.0:
        return 1.0
    mi = 0.0
    for (c, lab), v in joint.items():
        p = v / n
        mi += p * math.log(p / ((c_counts[c] / n) * (l_counts[lab] / n)))
    denom = (h_c + h_l) / 2.0
    return mi / denom


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


class Complementarity(NamedTuple):
    rho: float
    p_value: float
    pair_count: int


def complementarity(g: TransitionGraph, store: EmbeddingStore) -> Complementarity:
    """Spearman correlation between edge weight and endpoint similarity.

    Computed over every directed edge; the two-sided p-value uses the
    large-sample normal approximation z = rho * sqrt(n - 1).
    """
    edges = sorted(g.edge_weights)
    xs = np.array([g.edge_weights[e] for e in edges], dtype=np.float64)
    ys = np.array(
        [
            float(
                np.dot(
                    store.vector(a).astype(np.float64),
                    store.vector(b).astype(np.float64),
                )
            )
            for a, b in edges
        ],
        dtype=np.float64,
    )
    n = len(edges)
    if n < 2:
        return Complementarity(0.0, 1.0, n)
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    if np.std(rx) == 0.0 or np.std(ry) == 0.0:
        return Complementarity(0.0, 1.0, n)
    rho = float(np.corrcoef(rx, ry)[0, 1])
    z = rho * math.sqrt(n - 1)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return Complementarity(rho, min(1.0, p), n)
