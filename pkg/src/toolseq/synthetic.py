"""Synthetic workflow corpora with planted dependency chains.

Each domain owns a disjoint tool vocabulary organized into one or more
ordered dependency chains. Train trajectories are noisy walks of a chain;
test instances are the clean chains with fresh query texts. Tool
descriptions are bags of marker/topic words compatible with the built-in
hashing encoder, so the full pipeline runs without any external embedding
model.

Description construction is the point of the module: marker and topic
words make query similarity identify WHICH tools belong to an instance,
while carrying no reliable signal about their order. With
``invert_descriptions`` set, tools later in a chain receive strictly more
query-overlapping detail words, so a similarity-only ordering is actively
wrong (negative rank correlation), while transition evidence still
recovers the planted order. ``skip_noise`` drops interior tools with a
probability that ramps up along the chain, which leaves a monotone
gradient in incoming transition weights for the reranker to exploit.

All generation is deterministic per seed, with independent per-domain
substreams.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import InvalidArgument
from .trajectory import ToolId, Trajectory, TrajectoryDataset

MARKER_WORDS_PER_TOOL = 6
QUERY_MARKER_SAMPLE = 5
# Chain-opening tools of an order-inverting corpus carry extra markers so
# they stay the best semantic match; the inverted detail gradient then
# covers the rest of the chain. Without the anchor the greedy sequencer
# would start mid-chain and wander across chain boundaries.
FRONT_MARKER_WORDS = 20
FRONT_QUERY_SAMPLE = 16
TOPIC_WORDS_PER_DOMAIN = 2


@dataclass(frozen=True)
class WorkflowSpec:
    """Layout and noise parameters for one generated corpus.

    dependency_chains[d] lists domain d's chains, each an ordered tool-id
    sequence. Tool sets of different domains must be disjoint, and every
    one of the domain's tools_per_domain tools must appear in some chain.
    """

    domain_count: int
    tools_per_domain: int
    dependency_chains: tuple[tuple[tuple[ToolId, ...], ...], ...]
    query_template_noise: float
    trajectories_per_chain: int
    seed: int
    test_queries_per_chain: int = 2
    invert_descriptions: bool = False
    skip_noise: float = 0.0

    def __post_init__(self) -> None:
        chains = tuple(
            tuple(tuple(chain) for chain in domain_chains)
            for domain_chains in self.dependency_chains
        )
        object.__setattr__(self, "dependency_chains", chains)
        if self.domain_count < 1:
            raise InvalidArgument("domain_count must be >= 1")
        if self.tools_per_domain < 1:
            raise InvalidArgument("tools_per_domain must be >= 1")
        if len(chains) != self.domain_count:
            raise InvalidArgument(
                f"dependency_chains has {len(chains)} domains, "
                f"expected {self.domain_count}"
            )
        if not 0.0 <= self.query_template_noise <= 1.0:
            raise InvalidArgument("query_template_noise must be in [0, 1]")
        if not 0.0 <= self.skip_noise <= 1.0:
            raise InvalidArgument("skip_noise must be in [0, 1]")
        if self.trajectories_per_chain < 1:
            raise InvalidArgument("trajectories_per_chain must be >= 1")
        if self.test_queries_per_chain < 0:
            raise InvalidArgument("test_queries_per_chain must be >= 0")
        seen: dict[ToolId, int] = {}
        for d, domain_chains in enumerate(chains):
            if not domain_chains:
                raise InvalidArgument(f"domain {d} has no chains")
            domain_tools: set[ToolId] = set()
            for chain in domain_chains:
                if not chain:
                    raise InvalidArgument(f"domain {d} has an empty chain")
                if len(set(chain)) != len(chain):
                    raise InvalidArgument(
                        f"domain {d} chain repeats a tool: {list(chain)}"
                    )
                domain_tools.update(chain)
            if len(domain_tools) != self.tools_per_domain:
                raise InvalidArgument(
                    f"domain {d} chains cover {len(domain_tools)} tools, "
                    f"expected {self.tools_per_domain}"
                )
            for t in domain_tools:
                if t in seen and seen[t] != d:
                    raise InvalidArgument(
                        f"tool {t!r} appears in domains {seen[t]} and {d}"
                    )
                seen[t] = d

    def domain_tools(self, d: int) -> list[ToolId]:
        tools: set[ToolId] = set()
        for chain in self.dependency_chains[d]:
            tools.update(chain)
        return sorted(tools)


# ---------------------------------------------------------------------------
# Word vocabulary
#
# Every word is one lowercase alphanumeric run so the built-in tokenizer
# keeps it whole.


def _marker_words(d: int, ordinal: int, count: int = MARKER_WORDS_PER_TOOL) -> list[str]:
    return [f"mk{d}q{ordinal}q{j}" for j in range(count)]

def _topic_words(d: int) -> list[str]:
    return [f"topic{d}q{k}" for k in range(TOPIC_WORDS_PER_DOMAIN)]

def _detail_words(d: int, count: int) -> list[str]:
    return [f"detail{d}q{p}" for p in range(count)]


def _description_indexes(
    domain_chains: tuple[tuple[ToolId, ...], ...]
) -> dict[ToolId, int]:
    """Index of each tool in the first chain that mentions it."""
    pos: dict[ToolId, int] = {}
    for chain in domain_chains:
        for i, t in enumerate(chain):
            if t not in pos:
                pos[t] = i
    return pos


def _detail_count(index: int) -> int:
    # Strictly increasing from the second chain position on, so a
    # similarity sort runs the tail of a chain backwards.
    return max(0, index - 1)


def _domain_detail_total(indexes: dict[ToolId, int]) -> int:
    return max((_detail_count(i) for i in indexes.values()), default=0)


def _marker_count(spec: WorkflowSpec, index: int) -> int:
    if spec.invert_descriptions and index == 0:
        return FRONT_MARKER_WORDS
    return MARKER_WORDS_PER_TOOL


def build_descriptions(spec: WorkflowSpec) -> dict[ToolId, str]:
    descriptions: dict[ToolId, str] = {}
    for d in range(spec.domain_count):
        indexes = _description_indexes(spec.dependency_chains[d])
        for ordinal, t in enumerate(spec.domain_tools(d)):
            words = _marker_words(d, ordinal, _marker_count(spec, indexes[t]))
            words += _topic_words(d)
            if spec.invert_descriptions:
                words += _detail_words(d, _detail_count(indexes[t]))
            descriptions[t] = " ".join(words)
    return descriptions


def build_labels(spec: WorkflowSpec) -> dict[ToolId, str]:
    return {
        t: f"domain{d}"
        for d in range(spec.domain_count)
        for t in spec.domain_tools(d)
    }


def _query_text(
    spec: WorkflowSpec,
    d: int,
    chain: tuple[ToolId, ...],
    ordinals: dict[ToolId, int],
    indexes: dict[ToolId, int],
    rng: random.Random,
) -> str:
    """Topic words plus a sampled subset of each chain tool's markers."""
    words = list(_topic_words(d))
    if spec.invert_descriptions:
        words += _detail_words(d, _domain_detail_total(indexes))
    for t in chain:
        markers = _marker_words(d, ordinals[t], _marker_count(spec, indexes[t]))
        take = (
            FRONT_QUERY_SAMPLE
            if len(markers) == FRONT_MARKER_WORDS
            else QUERY_MARKER_SAMPLE
        )
        words += rng.sample(markers, min(take, len(markers)))
    return " ".join(words)


def _skip_probability(spec: WorkflowSpec, index: int, length: int) -> float:
    # Interior tools only; probability ramps up toward the chain tail so
    # incoming-weight features grade monotonically with position.
    if index == 0 or index == length - 1 or length < 3:
        return 0.0
    return spec.skip_noise * (index / (length - 2))


def _noisy_walk(
    spec: WorkflowSpec,
    chain: tuple[ToolId, ...],
    swap: bool,
    rng: random.Random,
) -> list[ToolId]:
    tools = [
        t
        for i, t in enumerate(chain)
        if not rng.random() < _skip_probability(spec, i, len(chain))
    ]
    if swap and len(tools) >= 2:
        at = rng.randrange(len(tools) - 1)
        tools[at], tools[at + 1] = tools[at + 1], tools[at]
    return tools


def generate(
    spec: WorkflowSpec,
) -> tuple[TrajectoryDataset, TrajectoryDataset, dict[ToolId, str], dict[ToolId, str]]:
    """Build (train, test, labels, descriptions) for a workflow spec.

    Swap noise is applied as an exact quota, floor(noise * n) trajectories
    per chain, so every planted edge keeps weight >= 1 - noise regardless
    of sampling luck.
    """
    train: list[Trajectory] = []
    test: list[Trajectory] = []
    for d in range(spec.domain_count):
        train_rng = random.Random(f"{spec.seed}|train|{d}")
        test_rng = random.Random(f"{spec.seed}|test|{d}")
        ordinals = {t: i for i, t in enumerate(spec.domain_tools(d))}
        indexes = _description_indexes(spec.dependency_chains[d])
        for chain in spec.dependency_chains[d]:
            n = spec.trajectories_per_chain
            swap_quota = math.floor(spec.query_template_noise * n)
            swapped = set(train_rng.sample(range(n), swap_quota))
            for i in range(n):
                tools = _noisy_walk(spec, chain, i in swapped, train_rng)
                query = _query_text(spec, d, chain, ordinals, indexes, train_rng)
                train.append(
                    Trajectory(query=query, tools=tuple(tools), source_index=0)
                )
            for _ in range(spec.test_queries_per_chain):
                query = _query_text(spec, d, chain, ordinals, indexes, test_rng)
                test.append(
                    Trajectory(query=query, tools=tuple(chain), source_index=0)
                )
    train = [
        Trajectory(query=t.query, tools=t.tools, source_index=i)
        for i, t in enumerate(train)
    ]
    test = [
        Trajectory(query=t.query, tools=t.tools, source_index=i)
        for i, t in enumerate(test)
    ]
    return (
        TrajectoryDataset(train),
        TrajectoryDataset(test),
        build_labels(spec),
        build_descriptions(spec),
    )


# ---------------------------------------------------------------------------
# Ready-made layouts


def basic_spec(
    domain_count: int = 2,
    tools_per_domain: int = 4,
    trajectories_per_chain: int = 50,
    query_template_noise: float = 0.0,
    seed: int = 0,
    test_queries_per_chain: int = 2,
) -> WorkflowSpec:
    """One chain per domain covering all its tools, in id order."""
    chains = tuple(
        (tuple(f"d{d}.t{j:02d}" for j in range(tools_per_domain)),)
        for d in range(domain_count)
    )
    return WorkflowSpec(
        domain_count=domain_count,
        tools_per_domain=tools_per_domain,
        dependency_chains=chains,
        query_template_noise=query_template_noise,
        trajectories_per_chain=trajectories_per_chain,
        seed=seed,
        test_queries_per_chain=test_queries_per_chain,
    )


def signal_gap_spec(
    domain_count: int = 6,
    trajectories_per_chain: int = 60,
    query_template_noise: float = 0.1,
    skip_noise: float = 0.3,
    test_queries_per_chain: int = 12,
    seed: int = 0,
) -> WorkflowSpec:
    """Order-inverting corpus exhibiting the selection-ordering gap.

    Each domain holds three length-6 chains. Chains within a domain
    pairwise share exactly one tool, sitting at position 1 of one chain
    and position 2 of the other, so no tool pair ever co-occurs in two
    chains (transition evidence stays consistent) while the shared tools
    keep few detail words and therefore sort late under similarity even
    though every gold order wants them early. Descriptions invert the
    similarity-order correlation; skip noise grades incoming transition
    weights by depth.
    """
    chains = []
    for d in range(domain_count):
        p = [f"d{d}.p{j:02d}" for j in range(12)]
        s_ab, s_ac, s_bc = f"d{d}.sab", f"d{d}.sac", f"d{d}.sbc"
        chains.append(
            (
                (p[0], s_ab, s_ac, p[1], p[2], p[3]),
                (p[4], s_bc, s_ab, p[5], p[6], p[7]),
                (p[8], s_ac, s_bc, p[9], p[10], p[11]),
            )
        )
    return WorkflowSpec(
        domain_count=domain_count,
        tools_per_domain=15,
        dependency_chains=tuple(chains),
        query_template_noise=query_template_noise,
        trajectories_per_chain=trajectories_per_chain,
        seed=seed,
        test_queries_per_chain=test_queries_per_chain,
        invert_descriptions=True,
        skip_noise=skip_noise,
    )
