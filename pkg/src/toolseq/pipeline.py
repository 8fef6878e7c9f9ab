"""End-to-end evaluation of the two-stage recommender over a test set.

One instance = one test trajectory: retrieve candidates for its query,
order them with the chosen stage-2 method, score against the gold
sequence. Candidate retrieval depends only on the query, the graph, and
the retrieval config, so different stage-2 arms (including feature
ablations) see identical candidate sets by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .embeddings import EmbeddingStore
from .errors import EmptyDataset, InvalidArgument
from .graph import TransitionGraph
from .metrics import AggregateReport, InstanceScore, aggregate, oracle_k, score_instance
from .stage1 import CandidateSet, RetrievalConfig, gs_hybrid_retrieve
from .stage2 import (
    DEFAULT_ALPHA_HR,
    PairwiseModel,
    RankedSequence,
    rerank_hybrid,
    rerank_lr,
    rerank_opt_perm,
    rerank_sem_sort,
)
from .trajectory import TrajectoryDataset

STAGE2_METHODS = ("sem-sort", "hybrid", "opt-perm", "lr")


def parse_k_mode(text: str) -> tuple[str, int | None]:
    """'oracle' or 'fixed:<n>' with n >= 1."""
    if text == "oracle":
        return "oracle", None
    if text.startswith("fixed:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError:
            raise InvalidArgument(f"bad k mode {text!r}") from None
        if n < 1:
            raise InvalidArgument("fixed k must be >= 1")
        return "fixed", n
    raise InvalidArgument(f"bad k mode {text!r}; expected 'oracle' or 'fixed:<n>'")


@dataclass(frozen=True)
class EvalArm:
    """A stage-2 configuration to evaluate."""

    method: str
    alpha_hr: float = DEFAULT_ALPHA_HR
    ablate: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.method not in STAGE2_METHODS:
            raise InvalidArgument(
                f"unknown stage-2 method {self.method!r}; "
                f"choose from {', '.join(STAGE2_METHODS)}"
            )
        if self.ablate and self.method != "lr":
            raise InvalidArgument("feature ablation applies only to the lr method")


@dataclass
class InstanceResult:
    index: int
    gold: list[str]
    k_eval: int
    candidates: CandidateSet
    ranked: RankedSequence
    score: InstanceScore


@dataclass
class EvalRun:
    arm: EvalArm
    k_mode: str
    instances: list[InstanceResult] = field(default_factory=list)

    @property
    def scores(self) -> list[InstanceScore]:
        return [r.score for r in self.instances]

    def report(self) -> AggregateReport:
        return aggregate(self.scores)


def _rerank(
    arm: EvalArm,
    candidates: CandidateSet,
    g: TransitionGraph,
    store: EmbeddingStore,
    query_vec: np.ndarray,
    model: PairwiseModel | None,
) -> RankedSequence:
    if arm.method == "sem-sort":
        return rerank_sem_sort(candidates)
    if arm.method == "hybrid":
        return rerank_hybrid(candidates, g, arm.alpha_hr)
    if arm.method == "opt-perm":
        return rerank_opt_perm(candidates, g)
    if model is None:
        raise InvalidArgument("the lr method needs a trained model")
    return rerank_lr(model, candidates, g, store, query_vec, arm.ablate)


def evaluate_dataset(
    test_ds: TrajectoryDataset,
    g: TransitionGraph,
    store: EmbeddingStore,
    arm: EvalArm,
    model: PairwiseModel | None = None,
    k_mode: str = "oracle",
    retrieval: RetrievalConfig | None = None,
    query_vec_fn: Callable[[str], np.ndarray] | None = None,
) -> EvalRun:
    """Score every test instance under one stage-2 arm.

    Results are in input order regardless of any execution strategy.
    """
    mode, fixed_k = parse_k_mode(k_mode)
    if not test_ds.trajectories:
        raise EmptyDataset("test set is empty")
    if query_vec_fn is None:
        query_vec_fn = store.encode_query
    run = EvalRun(arm=arm, k_mode=k_mode)
    for idx, tr in enumerate(test_ds.trajectories):
        qv = query_vec_fn(tr.query)
        k = fixed_k if mode == "fixed" else oracle_k(len(tr.tools))
        cand = gs_hybrid_retrieve(g, store, qv, k, retrieval)
        ranked = _rerank(arm, cand, g, store, qv, model)
        score = score_instance(ranked.tools, tr.tools)
        run.instances.append(
            InstanceResult(
                index=idx,
                gold=list(tr.tools),
                k_eval=k,
                candidates=cand,
                ranked=ranked,
                score=score,
            )
        )
    return run
