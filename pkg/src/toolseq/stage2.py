"""Stage 2: candidate reranking, including the learned pairwise model.

Rerankers take a stage-1 candidate set and emit a full ordering:

* ``rerank_sem_sort``: descending query similarity (no graph signal).
* ``rerank_hybrid``: maximize a blend of transition weights along the
  sequence and position-discounted similarity; exhaustive over permutations
  up to 7 candidates, greedy beyond.
* ``rerank_opt_perm``: maximize summed log transition weights (graph only),
  same exhaustive/greedy split.
* ``rerank_lr``: a learned pairwise preference model scores every ordered
  candidate pair; tools are ranked by their summed win probabilities.

The pairwise model is a small MLP (8-64-32-1, ReLU) over feature
differences, trained with binary cross-entropy and Adam. The logit is
antisymmetrized by construction, g(x) = (raw(x) - raw(-x)) / 2, and
prediction complements the probability on a canonical orientation of the
difference vector, so p(a,b) + p(b,a) == 1.0 holds exactly in floating
point, not merely in expectation. The network is plain numpy with manual
backprop: training must be bit-reproducible under a fixed seed, and the
gradients are verified against finite differences in the test suite.

Every ranking tie anywhere in this module breaks by ascending tool-id byte
order.

Per-tool features, computed against the instance's candidate set C:

  0  query-tool cosine similarity
  1  semantic rank within C, scaled to [0, 1] (0 when |C| == 1)
  2  total outgoing transition weight into C
  3  total incoming transition weight from C
  4  strongest single outgoing weight into C
  5  strongest single incoming weight from C
  6  positional prior mean (0.5 for tools unseen in training)
  7  |C| / 10

Ablation groups zero features at inference: ``semantic`` covers 0-1,
``graph`` 2-5, ``position`` 6-7.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingStore, semantic_similarity
from .errors import FormatError, InsufficientData, InvalidArgument
from .graph import TransitionGraph
from .stage1 import CandidateSet
from .trajectory import ToolId, TrajectoryDataset, split_train_validation

DIMS = (8, 64, 32, 1)
MODEL_FORMAT_VERSION = 1
OPT_PERM_EPSILON = 1e-6
EXHAUSTIVE_LIMIT = 7
DEFAULT_ALPHA_HR = 0.4

FEATURE_GROUPS: dict[str, tuple[int, ...]] = {
    "semantic": (0, 1),
    "graph": (2, 3, 4, 5),
    "position": (6, 7),
}


def _byte_key(tool: ToolId) -> bytes:
    return tool.encode("utf-8")


# ---------------------------------------------------------------------------
# Features


def extract_features(
    candidates: CandidateSet,
    g: TransitionGraph,
    store: EmbeddingStore,
    query_vec: np.ndarray,
) -> dict[ToolId, np.ndarray]:
    """Per-tool feature vectors relative to the candidate set."""
    tools = list(candidates.tools)
    if not tools:
        raise InvalidArgument("candidate set is empty")
    k = len(tools)
    sims = {
        t: (
            candidates.semantic_scores[t]
            if t in candidates.semantic_scores
            else semantic_similarity(store, query_vec, t)
        )
        for t in tools
    }
    by_sim = sorted(tools, key=lambda t: (-sims[t], _byte_key(t)))
    rank = {t: i for i, t in enumerate(by_sim)}

    features: dict[ToolId, np.ndarray] = {}
    tool_set = set(tools)
    for t in tools:
        out_w = [w for o, w in g.out_edges(t).items() if o in tool_set and o != t]
        in_w = [w for o, w in g.in_edges(t).items() if o in tool_set and o != t]
        vec = np.array(
            [
                sims[t],
                rank[t] / (k - 1) if k > 1 else 0.0,
                sum(out_w),
                sum(in_w),
                max(out_w) if out_w else 0.0,
                max(in_w) if in_w else 0.0,
                g.position_mean.get(t, 0.5),
                k / 10.0,
            ],
            dtype=np.float64,
        )
        features[t] = vec
    return features


def apply_ablation(
    features: dict[ToolId, np.ndarray], groups: Iterable[str]
) -> dict[ToolId, np.ndarray]:
    """Zero the named feature groups, leaving everything else untouched."""
    idxs: list[int] = []
    for name in groups:
        if name not in FEATURE_GROUPS:
            raise InvalidArgument(f"unknown feature group {name!r}")
        idxs.extend(FEATURE_GROUPS[name])
    if not idxs:
        return {t: v.copy() for t, v in features.items()}
    out: dict[ToolId, np.ndarray] = {}
    for t, v in features.items():
        w = v.copy()
        w[idxs] = 0.0
        out[t] = w
    return out


# ---------------------------------------------------------------------------
# Pairwise preference network


@dataclass
class PairwiseModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    seed: int = 0

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def copy(self) -> "PairwiseModel":
        return PairwiseModel(*(p.copy() for p in self.params()), seed=self.seed)


def init_model(seed: int = 0) -> PairwiseModel:
    """Seeded uniform Glorot init, biases zero."""
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for fan_in, fan_out in zip(DIMS[:-1], DIMS[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        layers.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        layers.append(np.zeros(fan_out, dtype=np.float64))
    return PairwiseModel(
        layers[0], layers[1], layers[2], layers[3], layers[4], layers[5], seed=seed
    )


def _forward_raw(m: PairwiseModel, x: np.ndarray):
    """Unconstrained scalar head on a batch; returns caches for backprop."""
    z1 = x @ m.w1.T + m.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ m.w2.T + m.b2
    a2 = np.maximum(z2, 0.0)
    raw = (a2 @ m.w3.T + m.b3)[:, 0]
    return raw, (x, z1, a1, z2, a2)


def _backward_raw(m: PairwiseModel, cache, d_raw: np.ndarray) -> list[np.ndarray]:
    x, z1, a1, z2, a2 = cache
    dz3 = d_raw[:, None]
    dw3 = dz3.T @ a2
    db3 = dz3.sum(axis=0)
    da2 = dz3 @ m.w3
    dz2 = da2 * (z2 > 0.0)
    dw2 = dz2.T @ a1
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ m.w2
    dz1 = da1 * (z1 > 0.0)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return [dw1, db1, dw2, db2, dw3, db3]


def antisymmetric_logit(m: PairwiseModel, x: np.ndarray) -> np.ndarray:
    """g(x) = (raw(x) - raw(-x)) / 2, so g(-x) == -g(x) bit-for-bit."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    pos, _ = _forward_raw(m, x)
    neg, _ = _forward_raw(m, -x)
    return (pos - neg) / 2.0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def pairwise_predict(m: PairwiseModel, fa: np.ndarray, fb: np.ndarray) -> float:
    """P(tool a precedes tool b), antisymmetric and exactly complementary.

    The probability is evaluated on a canonical orientation of the feature
    difference (sign of its first nonzero component) and complemented for
    the other orientation, which makes predict(a,b) + predict(b,a) == 1.0
    exact rather than accurate-to-rounding.
    """
    d = np.asarray(fa, dtype=np.float64) - np.asarray(fb, dtype=np.float64)
    nz = np.nonzero(d)[0]
    if len(nz) == 0:
        return 0.5
    if d[nz[0]] > 0:
        z = antisymmetric_logit(m, d[None, :])[0]
        return float(_sigmoid(np.array([z]))[0])
    z = antisymmetric_logit(m, -d[None, :])[0]
    return 1.0 - float(_sigmoid(np.array([z]))[0])


def bce_loss(m: PairwiseModel, x: np.ndarray, y: np.ndarray) -> float:
    z = antisymmetric_logit(m, x)
    losses = y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    return float(losses.mean())


def loss_and_grads(
    m: PairwiseModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Mean BCE over the batch and gradients for every parameter."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    raw_pos, cache_pos = _forward_raw(m, x)
    raw_neg, cache_neg = _forward_raw(m, -x)
    z = (raw_pos - raw_neg) / 2.0
    losses = y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    loss = float(losses.mean())
    dz = (_sigmoid(z) - y) / len(y)
    grads_pos = _backward_raw(m, cache_pos, dz / 2.0)
    grads_neg = _backward_raw(m, cache_neg, -dz / 2.0)
    return loss, [gp + gn for gp, gn in zip(grads_pos, grads_neg)]


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 2048
    max_epochs: int = 30
    patience: int = 5
    validation_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise InvalidArgument("learning_rate and batch_size must be positive")
        if self.max_epochs < 1 or self.patience < 1:
            raise InvalidArgument("max_epochs and patience must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise InvalidArgument("validation_fraction must be in (0, 1)")


def gold_candidate_set(
    tools: Sequence[ToolId],
    store: EmbeddingStore,
    query_vec: np.ndarray,
) -> CandidateSet:
    """Treat a gold tool set as its own candidate set for feature purposes."""
    sims = {t: semantic_similarity(store, query_vec, t) for t in tools}
    return CandidateSet(
        tools=list(tools), semantic_scores=sims, k_eval=len(tools)
    )


def build_training_pairs(
    ds: TrajectoryDataset,
    g: TransitionGraph,
    store: EmbeddingStore,
    query_vec_fn: Callable[[str], np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature-difference pairs from gold orderings.

    Every ordered gold pair (earlier, later) contributes its difference with
    label 1 and the reversed difference with label 0.
    """
    if query_vec_fn is None:
        query_vec_fn = store.encode_query
    xs: list[np.ndarray] = []
    ys: list[float] = []
    for tr in ds.trajectories:
        if len(tr.tools) < 2:
            continue
        qv = query_vec_fn(tr.query)
        cand = gold_candidate_set(tr.tools, store, qv)
        feats = extract_features(cand, g, store, qv)
        for i, j in itertools.combinations(range(len(tr.tools)), 2):
            a, b = tr.tools[i], tr.tools[j]
            diff = feats[a] - feats[b]
            xs.append(diff)
            ys.append(1.0)
            xs.append(-diff)
            ys.append(0.0)
    if not xs:
        raise InsufficientData("no trajectory with >= 2 tools; cannot form pairs")
    return np.vstack(xs), np.asarray(ys, dtype=np.float64)


def train_on_pairs(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray | None,
    y_val: np.ndarray | None,
    cfg: TrainingConfig | None = None,
) -> PairwiseModel:
    """Adam/BCE training loop with patience-based early stopping.

    Fully deterministic: parameter init and epoch shuffles derive from
    cfg.seed alone. When a validation split is supplied, the returned model
    is the snapshot with the best validation loss.
    """
    cfg = cfg or TrainingConfig()
    model = init_model(cfg.seed)
    rng = np.random.Generator(np.random.PCG64(cfg.seed + 1))
    params = model.params()
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    step = 0

    has_val = x_val is not None and y_val is not None and len(y_val) > 0
    best_val = math.inf
    best_snapshot = model.copy() if has_val else None
    stale_epochs = 0

    n = len(y_train)
    for _ in range(cfg.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            _, grads = loss_and_grads(model, x_train[batch], y_train[batch])
            step += 1
            for p, g_, ms, vs in zip(params, grads, m_state, v_state):
                ms *= cfg.beta1
                ms += (1.0 - cfg.beta1) * g_
                vs *= cfg.beta2
                vs += (1.0 - cfg.beta2) * g_ * g_
                m_hat = ms / (1.0 - cfg.beta1**step)
                v_hat = vs / (1.0 - cfg.beta2**step)
                p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        if has_val:
            val_loss = bce_loss(model, x_val, y_val)
            if val_loss < best_val:
                best_val = val_loss
                best_snapshot = model.copy()
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= cfg.patience:
                    break
    return best_snapshot if best_snapshot is not None else model


def train(
    ds: TrajectoryDataset,
    g: TransitionGraph,
    store: EmbeddingStore,
    cfg: TrainingConfig | None = None,
    query_vec_fn: Callable[[str], np.ndarray] | None = None,
) -> PairwiseModel:
    """Fit the pairwise reranker on a trajectory corpus."""
    cfg = cfg or TrainingConfig()
    if len(ds.trajectories) >= 2:
        train_ds, val_ds = split_train_validation(
            ds, cfg.validation_fraction, cfg.seed
        )
    else:
        train_ds, val_ds = ds, TrajectoryDataset([])
    x_train, y_train = build_training_pairs(train_ds, g, store, query_vec_fn)
    try:
        x_val, y_val = build_training_pairs(val_ds, g, store, query_vec_fn)
    except (InsufficientData, InvalidArgument):
        x_val, y_val = None, None
    return train_on_pairs(x_train, y_train, x_val, y_val, cfg)


# ---------------------------------------------------------------------------
# Rerankers


@dataclass
class RankedSequence:
    """A full ordering of the candidate tools with ranking diagnostics."""

    tools: list[ToolId]
    method: str
    tool_scores: dict[ToolId, float] = field(default_factory=dict)
    sequence_score: float | None = None


def rerank_sem_sort(candidates: CandidateSet) -> RankedSequence:
    """Order by descending query similarity alone."""
    scores = candidates.semantic_scores
    tools = sorted(candidates.tools, key=lambda t: (-scores[t], _byte_key(t)))
    return RankedSequence(
        tools=tools, method="sem-sort", tool_scores={t: scores[t] for t in tools}
    )


def _hybrid_sequence_score(
    perm: Sequence[ToolId],
    g: TransitionGraph,
    sims: dict[ToolId, float],
    alpha: float,
) -> float:
    trans = sum(
        g.edge_weights.get((a, b), 0.0) for a, b in zip(perm, perm[1:])
    )
    sem = sum(sims[t] / (i + 1) for i, t in enumerate(perm))
    return alpha * trans + (1.0 - alpha) * sem


def rerank_hybrid(
    candidates: CandidateSet,
    g: TransitionGraph,
    alpha_hr: float = DEFAULT_ALPHA_HR,
) -> RankedSequence:
    """Maximize blended transition and position-discounted similarity."""
    if not 0.0 <= alpha_hr <= 1.0:
        raise InvalidArgument("alpha_hr must be in [0, 1]")
    tools = sorted(candidates.tools, key=_byte_key)
    sims = candidates.semantic_scores
    if len(tools) <= EXHAUSTIVE_LIMIT:
        best: tuple[ToolId, ...] | None = None
        best_score = -math.inf
        for perm in itertools.permutations(tools):
            s = _hybrid_sequence_score(perm, g, sims, alpha_hr)
            if s > best_score:
                best, best_score = perm, s
        assert best is not None
        return RankedSequence(
            tools=list(best), method="hybrid", sequence_score=best_score
        )
    # Greedy beyond the exhaustive limit: maximize each appended tool's
    # marginal contribution to the sequence score.
    remaining = list(tools)
    seq: list[ToolId] = []
    total = 0.0
    while remaining:
        i = len(seq) + 1
        best_t = None
        best_gain = -math.inf
        for t in remaining:
            gain = (1.0 - alpha_hr) * sims[t] / i
            if seq:
                gain += alpha_hr * g.edge_weights.get((seq[-1], t), 0.0)
            if gain > best_gain:
                best_t, best_gain = t, gain
        assert best_t is not None
        seq.append(best_t)
        remaining.remove(best_t)
        total += best_gain
    return RankedSequence(tools=seq, method="hybrid", sequence_score=total)


def rerank_opt_perm(candidates: CandidateSet, g: TransitionGraph) -> RankedSequence:
    """Maximize summed log transition weights; similarity plays no part."""
    tools = sorted(candidates.tools, key=_byte_key)
    if len(tools) <= EXHAUSTIVE_LIMIT:
        best: tuple[ToolId, ...] | None = None
        best_score = -math.inf
        for perm in itertools.permutations(tools):
            s = sum(
                math.log(g.edge_weights.get((a, b), 0.0) + OPT_PERM_EPSILON)
                for a, b in zip(perm, perm[1:])
            )
            if s > best_score:
                best, best_score = perm, s
        assert best is not None
        return RankedSequence(
            tools=list(best), method="opt-perm", sequence_score=best_score
        )
    remaining = list(tools)
    seq: list[ToolId] = []
    total = 0.0
    while remaining:
        best_t = None
        best_gain = -math.inf
        for t in remaining:
            if seq:
                gain = math.log(
                    g.edge_weights.get((seq[-1], t), 0.0) + OPT_PERM_EPSILON
                )
            else:
                gain = 0.0
            if gain > best_gain:
                best_t, best_gain = t, gain
        assert best_t is not None
        seq.append(best_t)
        remaining.remove(best_t)
        total += best_gain
    return RankedSequence(tools=seq, method="opt-perm", sequence_score=total)


def rerank_lr(
    model: PairwiseModel,
    candidates: CandidateSet,
    g: TransitionGraph,
    store: EmbeddingStore,
    query_vec: np.ndarray,
    ablate: Iterable[str] = (),
) -> RankedSequence:
    """Rank by summed pairwise win probability under the learned model."""
    feats = extract_features(candidates, g, store, query_vec)
    feats = apply_ablation(feats, ablate)
    tools = sorted(candidates.tools, key=_byte_key)
    wins = {t: 0.0 for t in tools}
    for a, b in itertools.combinations(tools, 2):
        p = pairwise_predict(model, feats[a], feats[b])
        wins[a] += p
        wins[b] += 1.0 - p
    ordered = sorted(tools, key=lambda t: (-wins[t], _byte_key(t)))
    return RankedSequence(tools=ordered, method="lr", tool_scores=wins)


# ---------------------------------------------------------------------------
# Model serialization


def serialize_model(m: PairwiseModel, stream: IO[str]) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "dims": list(DIMS),
        "seed": m.seed,
        "layers": [
            {"weights": m.w1.tolist(), "bias": m.b1.tolist()},
            {"weights": m.w2.tolist(), "bias": m.b2.tolist()},
            {"weights": m.w3.tolist(), "bias": m.b3.tolist()},
        ],
    }
    json.dump(payload, stream)


def deserialize_model(stream: IO[str] | str) -> PairwiseModel:
    text = stream if isinstance(stream, str) else stream.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise FormatError("model payload must be a JSON object")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"unsupported format_version {payload.get('format_version')!r}"
        )
    if payload.get("dims") != list(DIMS):
        raise FormatError(f"dims must be {list(DIMS)}")
    layers = payload.get("layers")
    if not isinstance(layers, list) or len(layers) != 3:
        raise FormatError("model must have exactly 3 layers")
    arrays: list[np.ndarray] = []
    for li, layer in enumerate(layers):
        if not isinstance(layer, dict) or "weights" not in layer or "bias" not in layer:
            raise FormatError(f"layer {li} needs 'weights' and 'bias'")
        try:
            w = np.asarray(layer["weights"], dtype=np.float64)
            b = np.asarray(layer["bias"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"layer {li} arrays are malformed") from exc
        expected = (DIMS[li + 1], DIMS[li])
        if w.shape != expected or b.shape != (DIMS[li + 1],):
            raise FormatError(
                f"layer {li} shapes {w.shape}/{b.shape} do not match dims"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise FormatError(f"layer {li} contains non-finite values")
        arrays.extend([w, b])
    seed = payload.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise FormatError("seed must be an integer")
    return PairwiseModel(
        arrays[0], arrays[1], arrays[2], arrays[3], arrays[4], arrays[5], seed=seed
    )
