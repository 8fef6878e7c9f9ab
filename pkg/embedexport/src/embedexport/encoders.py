"""Encoder backends and the model-tag registry.

An encoder backend is any object with a ``dimension`` attribute and an
``encode_batch(texts) -> ndarray of shape (len(texts), dimension)`` method.
Rows need not be normalized; the export step normalizes.

The registry maps a model tag to a zero-argument factory. Constructing the
backend is the availability check: a factory must raise
``EncoderUnavailable`` if its model cannot be loaded locally, so every
failure happens before any text is encoded or any output is written.

Two backends ship by default:

- ``all-MiniLM-L6-v2``: the pretrained sentence-transformers model of the
  same name (native dimension 384). Requires the optional
  ``sentence-transformers`` dependency and locally available weights.
- ``hash-384``: a dependency-free signed hashing bag-of-words encoder with
  dimension 384. Deterministic across runs and platforms; exists so the
  full export pipeline can run and be tested without model downloads.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import EncoderUnavailable, InvalidJob, UnknownModelTag

DEFAULT_MODEL_TAG = "all-MiniLM-L6-v2"
HASH_MODEL_TAG = "hash-384"
HASH_DIMENSION = 384

_WORD_RE = re.compile(r"[0-9a-z]+")


class Encoder(Protocol):
    dimension: int

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingEncoder:
    """Signed feature-hashing bag of words.

    Each lowercase alphanumeric token is hashed (keyed cryptographically,
    not with Python's randomized builtin hash) to a coordinate and a sign;
    its weight is log(1 + term frequency). A token-free text maps to the
    zero vector; the export step substitutes a fallback for such rows.
    """

    def __init__(self, dimension: int = HASH_DIMENSION) -> None:
        if dimension < 1:
            raise InvalidJob("encoder dimension must be >= 1")
        self.dimension = dimension

    def _coordinate(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16).digest()
        value = int.from_bytes(digest, "little")
        sign = 1.0 if value & 1 else -1.0
        return (value >> 1) % self.dimension, sign

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for row, text in enumerate(texts):
            counts = Counter(_WORD_RE.findall(text.lower()))
            for token, count in counts.items():
                index, sign = self._coordinate(token)
                out[row, index] += sign * math.log1p(count)
        return out


class SentenceTransformerEncoder:
    """Pretrained sentence-transformers backend.

    The model is loaded in the constructor so that a missing dependency or
    unavailable weights fail before any encoding starts.
    """

    def __init__(self, model_name: str) -> None:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderUnavailable(
                f"model {model_name!r} needs the 'sentence-transformers' package; "
                f"install the 'st' extra"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name, device="cpu")
        except Exception as exc:  # load failures surface as many exception types
            raise EncoderUnavailable(
                f"model {model_name!r} could not be loaded: {exc}"
            ) from exc
        self.dimension = int(self._model.get_sentence_embedding_dimension())

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        vectors = self._model.encode(
            list(texts),
            batch_size=len(texts),
            convert_to_numpy=True,
            show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float64)


_FACTORIES: dict[str, Callable[[], Encoder]] = {
    DEFAULT_MODEL_TAG: lambda: SentenceTransformerEncoder(
        "sentence-transformers/all-MiniLM-L6-v2"
    ),
    HASH_MODEL_TAG: lambda: HashingEncoder(HASH_DIMENSION),
}


def available_tags() -> list[str]:
    return sorted(_FACTORIES)


def register_encoder(tag: str, factory: Callable[[], Encoder]) -> None:
    """Add a backend under a new tag; re-registering a tag is refused."""
    if not tag:
        raise InvalidJob("model tag must be a non-empty string")
    if tag in _FACTORIES:
        raise InvalidJob(f"model tag {tag!r} is already registered")
    _FACTORIES[tag] = factory


def create_encoder(tag: str) -> Encoder:
    """Construct the backend for a tag; fails before any encoding happens."""
    try:
        factory = _FACTORIES[tag]
    except KeyError:
        known = ", ".join(available_tags())
        raise UnknownModelTag(f"unknown model tag {tag!r}; known tags: {known}") from None
    return factory()
