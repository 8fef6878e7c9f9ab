"""Unit-vector embedding store with a deterministic builtin encoder.

The store maps tool ids to L2-normalized float32 vectors of one shared
dimension. Vectors come from either the builtin hashing encoder below or an
external file of precomputed vectors (line-delimited ``{"id": ..., "vector":
[...]}``); the ``encoder_tag`` records which, so downstream reports can say
what produced the geometry.

The builtin encoder is a signed hashing bag-of-words: lowercase, split on
non-alphanumeric runs, hash each token to a bucket and a sign, weight by
log(1 + term frequency), L2-normalize. It is deliberately dependency-free
and stable across runs and platforms; the hash is keyed cryptographically
(blake2b), not by Python's randomized builtin hash.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import EmptyLibrary, FormatError, InvalidArgument, MissingEmbedding
from .trajectory import ToolId

DEFAULT_DIMENSION = 384
BUILTIN_ENCODER_TAG = "builtin-hash-tfidf"
EXTERNAL_ENCODER_TAG = "external"
NORM_TOLERANCE = 1e-5

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class ZeroVectorWarning(UserWarning):
    """Raised (as a warning) when a text has no usable tokens."""


@dataclass
class EmbeddingStore:
    dimension: int
    vectors: dict[ToolId, np.ndarray] = field(default_factory=dict)
    encoder_tag: str = BUILTIN_ENCODER_TAG

    def __contains__(self, tool: ToolId) -> bool:
        return tool in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def tools(self) -> list[ToolId]:
        return sorted(self.vectors)

    def vector(self, tool: ToolId) -> np.ndarray:
        try:
            return self.vectors[tool]
        except KeyError:
            raise MissingEmbedding(tool) from None

    def encode_query(self, text: str) -> np.ndarray:
        if self.encoder_tag != BUILTIN_ENCODER_TAG:
            raise InvalidArgument(
                "store holds external vectors; query vectors must be supplied, "
                "not encoded"
            )
        return builtin_encode(text, self.dimension)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _bucket_and_sign(token: str, dimension: int) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "big")
    bucket = value % dimension
    sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
    return bucket, sign


def builtin_encode(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Encode text to a float32 unit vector of the given dimension."""
    if dimension < 1:
        raise InvalidArgument("dimension must be >= 1")
    tokens = tokenize(text)
    if not tokens:
        warnings.warn(
            f"text {text!r} has no usable tokens; using fallback basis vector",
            ZeroVectorWarning,
            stacklevel=2,
        )
        vec = np.zeros(dimension, dtype=np.float32)
        vec[0] = 1.0
        return vec
    tf: dict[str, int] = {}
    for tok in tokens:
        tf[tok] = tf.get(tok, 0) + 1
    acc = np.zeros(dimension, dtype=np.float64)
    for tok, count in tf.items():
        bucket, sign = _bucket_and_sign(tok, dimension)
        acc[bucket] += sign * math.log1p(count)
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        # Signed buckets can cancel exactly; fall back as for empty text.
        warnings.warn(
            f"tokens of {text!r} cancelled to a zero vector; using fallback",
            ZeroVectorWarning,
            stacklevel=2,
        )
        vec = np.zeros(dimension, dtype=np.float32)
        vec[0] = 1.0
        return vec
    return (acc / norm).astype(np.float32)


def build_store(
    descriptions: dict[ToolId, str], dimension: int = DEFAULT_DIMENSION
) -> EmbeddingStore:
    """Encode a tool-description map with the builtin encoder."""
    store = EmbeddingStore(dimension=dimension, encoder_tag=BUILTIN_ENCODER_TAG)
    for tool in sorted(descriptions):
        store.vectors[tool] = builtin_encode(descriptions[tool], dimension)
    return store


def load_embeddings(stream: IO[str] | str) -> EmbeddingStore:
    """Load an external embedding file, normalizing every vector on ingest."""
    import io

    handle = io.StringIO(stream) if isinstance(stream, str) else stream
    vectors: dict[ToolId, np.ndarray] = {}
    dimension: int | None = None
    for lineno, raw in enumerate(handle, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict) or "id" not in record or "vector" not in record:
            raise FormatError(f"line {lineno}: record needs 'id' and 'vector'")
        key = record["id"]
        vec = record["vector"]
        if not isinstance(key, str) or not key:
            raise FormatError(f"line {lineno}: 'id' must be a non-empty string")
        if key in vectors:
            raise FormatError(f"line {lineno}: duplicate id {key!r}")
        if (
            not isinstance(vec, list)
            or not vec
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in vec)
        ):
            raise FormatError(f"line {lineno}: 'vector' must be a numeric array")
        if dimension is None:
            dimension = len(vec)
        elif len(vec) != dimension:
            raise FormatError(
                f"line {lineno}: vector has dimension {len(vec)}, expected {dimension}"
            )
        arr = np.asarray(vec, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if not math.isfinite(norm) or norm == 0.0:
            raise FormatError(f"line {lineno}: vector for {key!r} is not normalizable")
        vectors[key] = (arr / norm).astype(np.float32)
    if dimension is None:
        raise FormatError("embedding file contains no records")
    return EmbeddingStore(
        dimension=dimension, vectors=vectors, encoder_tag=EXTERNAL_ENCODER_TAG
    )


def save_embeddings(store: EmbeddingStore, stream: IO[str]) -> None:
    """Write the store in the external embedding file format."""
    for tool in sorted(store.vectors):
        vec = [float(x) for x in store.vectors[tool]]
        stream.write(json.dumps({"id": tool, "vector": vec}) + "\n")


def semantic_similarity(
    store: EmbeddingStore, query_vec: np.ndarray, tool: ToolId
) -> float:
    """Cosine similarity of unit vectors, i.e. their dot product."""
    return float(np.dot(store.vector(tool).astype(np.float64), query_vec))


def top_k_semantic(
    store: EmbeddingStore,
    query_vec: np.ndarray,
    k: int,
    universe: Sequence[ToolId] | None = None,
) -> list[tuple[ToolId, float]]:
    """The k most similar tools, ties broken by ascending tool-id byte order.

    ``universe`` restricts the search; by default all stored tools compete.
    Asking for more tools than exist returns everything, ranked.
    """
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    pool: Iterable[ToolId] = store.tools() if universe is None else universe
    scored = [(t, semantic_similarity(store, query_vec, t)) for t in pool]
    if not scored:
        raise EmptyLibrary("no tools to rank")
    scored.sort(key=lambda item: (-item[1], item[0].encode("utf-8")))
    return scored[:k]
