"""Instance scoring for ordered tool recommendations, plus aggregation.

Set metrics compare the predicted and gold tool sets; order metrics compare
orderings restricted to the common tools C (both sequences are duplicate-free
so all pairwise comparisons are strict). Kendall's tau and ordered precision
are defined as 0 when fewer than two common tools exist, transition accuracy
as 0 when the gold sequence has fewer than two tools.

Transition accuracy asks, for each consecutive gold pair, whether the
prediction keeps the pair in order within a rank gap of at most two; a gold
tool missing from the prediction fails its pairs.

Significance of paired differences uses a percentile bootstrap over instance
indices with a fixed seed; the reported interval is the 95% percentile
interval of the first argument's resampled metric mean.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument
from .trajectory import ToolId

METRIC_NAMES = (
    "set_precision",
    "set_recall",
    "set_f1",
    "ord_prec",
    "kendall_tau",
    "trans_acc",
    "first_acc",
)

BUCKET_LABELS = ("1-2", "3-4", "5+")


@dataclass(frozen=True)
class InstanceScore:
    set_precision: float
    set_recall: float
    set_f1: float
    ord_prec: float
    kendall_tau: float
    trans_acc: float
    first_acc: float
    gold_length: int
    k_eval: int

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise InvalidArgument(f"unknown metric {name!r}")
        return getattr(self, name)

    def as_dict(self) -> dict[str, float | int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def oracle_k(gold_length: int) -> int:
    """Evaluation K for gold-aware runs: the gold length, floored at 3."""
    if gold_length < 1:
        raise InvalidArgument("gold length must be >= 1")
    return max(gold_length, 3)


def score_instance(pred: Sequence[ToolId], gold: Sequence[ToolId]) -> InstanceScore:
    """Score one prediction against one gold sequence."""
    if not gold:
        raise InvalidArgument("gold sequence must be non-empty")
    if len(set(gold)) != len(gold):
        raise InvalidArgument("gold sequence contains duplicates")
    if len(set(pred)) != len(pred):
        raise InvalidArgument("prediction contains duplicates")

    pred_set = set(pred)
    gold_set = set(gold)
    common = pred_set & gold_set

    set_precision = len(common) / len(pred) if pred else 0.0
    set_recall = len(common) / len(gold)
    if set_precision + set_recall == 0.0:
        set_f1 = 0.0
    else:
        set_f1 = 2.0 * set_precision * set_recall / (set_precision + set_recall)

    pred_rank = {t: i for i, t in enumerate(pred)}
    gold_rank = {t: i for i, t in enumerate(gold)}

    if len(common) < 2:
        ord_prec = 0.0
        kendall_tau = 0.0
    else:
        concordant = 0
        discordant = 0
        common_sorted = sorted(common)
        for a, b in itertools.combinations(common_sorted, 2):
            same = (pred_rank[a] - pred_rank[b]) * (gold_rank[a] - gold_rank[b])
            if same > 0:
                concordant += 1
            else:
                discordant += 1
        n_pairs = concordant + discordant
        ord_prec = concordant / n_pairs
        kendall_tau = (concordant - discordant) / n_pairs

    if len(gold) < 2:
        trans_acc = 0.0
    else:
        hits = 0
        for a, b in zip(gold, gold[1:]):
            if a in pred_rank and b in pred_rank:
                gap = pred_rank[b] - pred_rank[a]
                if 0 < gap <= 2:
                    hits += 1
        trans_acc = hits / (len(gold) - 1)

    first_acc = 1.0 if pred and pred[0] == gold[0] else 0.0

    return InstanceScore(
        set_precision=set_precision,
        set_recall=set_recall,
        set_f1=set_f1,
        ord_prec=ord_prec,
        kendall_tau=kendall_tau,
        trans_acc=trans_acc,
        first_acc=first_acc,
        gold_length=len(gold),
        k_eval=len(pred),
    )


def bucket_of(gold_length: int) -> str:
    if gold_length <= 2:
        return "1-2"
    if gold_length <= 4:
        return "3-4"
    return "5+"


@dataclass(frozen=True)
class AggregateReport:
    count: int
    means: dict[str, float]
    buckets: dict[str, dict[str, float | int]]


def aggregate(scores: Iterable[InstanceScore]) -> AggregateReport:
    """Macro means of every metric, overall and per gold-length bucket."""
    scores = list(scores)
    if not scores:
        raise InvalidArgument("no scores to aggregate")
    means = {
        name: sum(s.metric(name) for s in scores) / len(scores)
        for name in METRIC_NAMES
    }
    buckets: dict[str, dict[str, float | int]] = {}
    for label in BUCKET_LABELS:
        members = [s for s in scores if bucket_of(s.gold_length) == label]
        if not members:
            continue
        entry: dict[str, float | int] = {"count": len(members)}
        for name in METRIC_NAMES:
            entry[name] = sum(s.metric(name) for s in members) / len(members)
        buckets[label] = entry
    return AggregateReport(count=len(scores), means=means, buckets=buckets)


class BootstrapResult(NamedTuple):
    observed_diff: float
    p_value: float
    ci_low: float
    ci_high: float
    iterations: int


def bootstrap_compare(
    scores_a: Sequence[InstanceScore],
    scores_b: Sequence[InstanceScore],
    metric: str,
    iterations: int = 10_000,
    seed: int = 0,
    exhaustive: bool = False,
) -> BootstrapResult:
    """Paired bootstrap comparison of one metric's mean between two systems.

    ``exhaustive`` replaces sampling with full enumeration of the n**n index
    assignments (only sensible for tiny n); the p-value formula is the same
    two-sided tail proportion either way.
    """
    if len(scores_a) != len(scores_b):
        raise InvalidArgument("paired score lists must have equal length")
    n = len(scores_a)
    if n < 2:
        raise InvalidArgument("need at least 2 paired instances")
    a = np.array([s.metric(metric) for s in scores_a], dtype=np.float64)
    b = np.array([s.metric(metric) for s in scores_b], dtype=np.float64)

    if exhaustive:
        if n > 7:
            raise InvalidArgument("exhaustive enumeration only supported for n <= 7")
        idx = np.array(list(itertools.product(range(n), repeat=n)), dtype=np.intp)
        total = len(idx)
    else:
        if iterations < 1:
            raise InvalidArgument("iterations must be >= 1")
        rng = np.random.Generator(np.random.PCG64(seed))
        idx = rng.integers(0, n, size=(iterations, n))
        total = iterations

    a_means = a[idx].mean(axis=1)
    b_means = b[idx].mean(axis=1)
    diffs = a_means - b_means
    p = 2.0 * min(
        float(np.mean(diffs <= 0.0)),
        float(np.mean(diffs >= 0.0)),
    )
    ci_low, ci_high = np.percentile(a_means, [2.5, 97.5])
    return BootstrapResult(
        observed_diff=float(a.mean() - b.mean()),
        p_value=min(1.0, p),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        iterations=total,
    )
