"""Trajectory corpus loading, validation, and splitting.

A trajectory is one observed agent episode: the natural-language query plus
the ordered tools the agent invoked. Corpora are stored line-delimited, one
JSON object per line with exactly the fields ``query`` (string) and ``tools``
(array of strings). Tool identifiers are opaque strings; composite names are
expected to arrive already joined with ``::`` by the producer.

Repeated invocations of the same tool within an episode carry no extra
ordering information for set-based recommendation, so parsing keeps only the
first occurrence of each tool and preserves the order of first occurrences.
"""

from __future__ import annotations

import io
import json
import random
from dataclasses import dataclass, field
from typing import IO, Iterable

from .errors import EmptyDataset, InvalidArgument, ParseError

ToolId = str


def dedup_first_occurrence(tools: Iterable[ToolId]) -> list[ToolId]:
    """Drop repeated tool ids, keeping each id at its first position."""
    seen: set[ToolId] = set()
    out: list[ToolId] = []
    for t in tools:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


@dataclass(frozen=True)
class Trajectory:
    """One episode: a query and its ordered, duplicate-free tool sequence."""

    query: str
    tools: tuple[ToolId, ...]
    source_index: int = 0

    def __post_init__(self) -> None:
        if len(set(self.tools)) != len(self.tools):
            raise InvalidArgument(f"duplicate tools in trajectory {self.tools!r}")
        if any((not isinstance(t, str)) or t == "" for t in self.tools):
            raise InvalidArgument("tool ids must be non-empty strings")
        if self.source_index < 0:
            raise InvalidArgument("source_index must be >= 0")


@dataclass
class TrajectoryDataset:
    """An ordered collection of trajectories plus the tools they mention.

    ``skipped`` counts input records that were dropped for having an empty
    tool list; it is parse metadata, not content, and is excluded from
    equality so serialization round-trips compare clean.
    """

    trajectories: list[Trajectory]
    skipped: int = field(default=0, compare=False)

    @property
    def tool_vocabulary(self) -> set[ToolId]:
        vocab: set[ToolId] = set()
        for tr in self.trajectories:
            vocab.update(tr.tools)
        return vocab

    def __len__(self) -> int:
        return len(self.trajectories)


def parse_trajectories(source: IO[str] | str) -> TrajectoryDataset:
    """Parse a line-delimited trajectory file.

    Blank lines are ignored. Records with an empty ``tools`` array are
    dropped and counted in the result's ``skipped`` field. Anything else that
    fails to parse raises ParseError with its 1-based line number.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    trajectories: list[Trajectory] = []
    skipped = 0
    saw_line = False
    for lineno, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        saw_line = True
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise ParseError(lineno, "record must be a JSON object")
        if "query" not in record or "tools" not in record:
            raise ParseError(lineno, "record must have 'query' and 'tools'")
        query = record["query"]
        tools = record["tools"]
        if not isinstance(query, str):
            raise ParseError(lineno, "'query' must be a string")
        if not isinstance(tools, list) or any(
            (not isinstance(t, str)) or t == "" for t in tools
        ):
            raise ParseError(lineno, "'tools' must be a list of non-empty strings")
        if not tools:
            skipped += 1
            continue
        trajectories.append(
            Trajectory(
                query=query,
                tools=tuple(dedup_first_occurrence(tools)),
                source_index=lineno - 1,
            )
        )
    if not saw_line:
        raise EmptyDataset("trajectory file is empty")
    if not trajectories:
        raise EmptyDataset("trajectory file contains no usable records")
    return TrajectoryDataset(trajectories, skipped=skipped)


def serialize_trajectories(ds: TrajectoryDataset, stream: IO[str]) -> None:
    """Write the dataset in the line-delimited input format."""
    for tr in ds.trajectories:
        stream.write(
            json.dumps({"query": tr.query, "tools": list(tr.tools)}) + "\n"
        )


def split_train_validation(
    ds: TrajectoryDataset, fraction: float, seed: int
) -> tuple[TrajectoryDataset, TrajectoryDataset]:
    """Deterministically split off a validation slice of the dataset.

    The validation size is floor(n * fraction), raised to 1 so the slice is
    never empty. Original ordering is preserved within each side.
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidArgument("fraction must be in (0, 1)")
    n = len(ds.trajectories)
    if n < 2:
        raise InvalidArgument("need at least 2 trajectories to split")
    n_val = max(1, int(n * fraction))
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    val_set = set(indices[:n_val])
    train = [tr for i, tr in enumerate(ds.trajectories) if i not in val_set]
    val = [tr for i, tr in enumerate(ds.trajectories) if i in val_set]
    return TrajectoryDataset(train), TrajectoryDataset(val)
