"""Batch export of {id, text} records to the embedding interchange format.

Input: UTF-8 line-delimited JSON objects ``{"id": <non-empty string>,
"text": <string>}``; blank lines are skipped; duplicate ids are rejected.

Output: one line per input record, in input order, in the interchange
format ``{"id": ..., "vector": [...]}`` with L2-normalized float32 vectors
of the encoder's native dimension.

Failure ordering: the input is validated and the encoder constructed
before any encoding runs, and the output file is only created after every
vector has been computed — a failed export never leaves a partial file.

Edge rows: an empty (or whitespace-only) text is encoded as its id string
instead, with a warning; a text the encoder maps to an exactly-zero vector
gets a deterministic fallback basis vector, also with a warning. Both
guards keep every output row normalizable, so the interchange loader
accepts every exporter output.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .encoders import DEFAULT_MODEL_TAG, create_encoder
from .errors import ExportError, InputFormatError, InvalidJob

NORM_TOLERANCE = 1e-5


class EmptyTextWarning(UserWarning):
    """A record's text was empty; its id string was encoded instead."""


class ZeroVectorWarning(UserWarning):
    """A record encoded to an exactly-zero vector; a fallback basis vector was used."""


@dataclass(frozen=True)
class ExportJob:
    input_path: str | Path
    output_path: str | Path
    model_tag: str = DEFAULT_MODEL_TAG
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise InvalidJob(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.model_tag:
            raise InvalidJob("model_tag must be a non-empty string")


@dataclass(frozen=True)
class ExportResult:
    rows: int
    dimension: int
    output_path: str


def read_records(stream: IO[str]) -> list[tuple[str, str]]:
    """Parse and validate (id, text) records, preserving input order."""
    records: list[tuple[str, str]] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise InputFormatError(f"line {lineno}: record needs 'id' and 'text'")
        rid, text = obj["id"], obj["text"]
        if not isinstance(rid, str) or not rid:
            raise InputFormatError(f"line {lineno}: 'id' must be a non-empty string")
        if not isinstance(text, str):
            raise InputFormatError(f"line {lineno}: 'text' must be a string")
        if rid in seen:
            raise InputFormatError(f"line {lineno}: duplicate id {rid!r}")
        seen.add(rid)
        records.append((rid, text))
    if not records:
        raise InputFormatError("input contains no records")
    return records


def _batches(items: list[str], size: int) -> Iterable[list[str]]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _normalize_rows(ids: list[str], vectors: np.ndarray) -> np.ndarray:
    out = np.empty_like(vectors)
    for row in range(vectors.shape[0]):
        norm = float(np.linalg.norm(vectors[row]))
        if norm == 0.0:
            warnings.warn(
                f"record {ids[row]!r} encoded to a zero vector; "
                f"using fallback basis vector",
                ZeroVectorWarning,
                stacklevel=3,
            )
            out[row] = 0.0
            out[row, 0] = 1.0
        else:
            out[row] = vectors[row] / norm
    return out


def export(job: ExportJob) -> ExportResult:
    """Encode every input record and write the interchange file."""
    with open(job.input_path, "r", encoding="utf-8") as handle:
        records = read_records(handle)

    encoder = create_encoder(job.model_tag)

    ids = [rid for rid, _ in records]
    texts: list[str] = []
    for rid, text in records:
        if not text.strip():
            warnings.warn(
                f"record {rid!r} has empty text; encoding its id instead",
                EmptyTextWarning,
                stacklevel=2,
            )
            texts.append(rid)
        else:
            texts.append(text)

    chunks: list[np.ndarray] = []
    for batch in _batches(texts, job.batch_size):
        encoded = np.asarray(encoder.encode_batch(batch), dtype=np.float64)
        if encoded.shape != (len(batch), encoder.dimension):
            raise ExportError(
                f"encoder returned shape {encoded.shape}, "
                f"expected {(len(batch), encoder.dimension)}"
            )
        chunks.append(encoded)
    vectors = np.vstack(chunks)

    normalized = _normalize_rows(ids, vectors).astype(np.float32)

    with open(job.output_path, "w", encoding="utf-8", newline="\n") as out:
        for row, rid in enumerate(ids):
            payload = {"id": rid, "vector": [float(x) for x in normalized[row]]}
            out.write(json.dumps(payload) + "\n")

    return ExportResult(
        rows=len(ids), dimension=encoder.dimension, output_path=str(job.output_path)
    )
