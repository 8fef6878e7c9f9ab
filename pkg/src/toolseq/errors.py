"""Exception types shared across the package.

Every error raised deliberately by this package derives from ToolseqError so
callers (including the CLI) can catch one base class and translate it into a
nonzero exit without swallowing genuine bugs.
"""

from __future__ import annotations


class ToolseqError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ToolseqError):
    """A record in an input file could not be parsed.

    Carries the 1-based line number of the offending record.
    """

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class FormatError(ToolseqError):
    """A serialized payload is structurally invalid."""


class IntegrityError(ToolseqError):
    """A payload parsed cleanly but violates a semantic invariant."""


class EmptyDataset(ToolseqError):
    """An operation required a non-empty trajectory dataset."""


class EmptyLibrary(ToolseqError):
    """An operation required a non-empty tool universe."""


class InvalidArgument(ToolseqError):
    """An argument violated a documented precondition."""


class InsufficientData(ToolseqError):
    """Training data does not contain enough signal to fit a model."""


class MissingLabel(ToolseqError):
    """A tool has no entry in the provided label map."""

    def __init__(self, tool: str):
        super().__init__(f"no label for tool {tool!r}")
        self.tool = tool


class MissingEmbedding(ToolseqError):
    """A tool or query has no vector in the embedding store."""

    def __init__(self, key: str):
        super().__init__(f"no embedding for {key!r}")
        self.key = key
