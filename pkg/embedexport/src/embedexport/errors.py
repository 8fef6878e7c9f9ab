"""Error taxonomy for the embedding exporter.

Every failure the exporter can raise deliberately is an ``ExportError``
subclass, so callers (and the CLI) can catch one base type and report the
subclass name as the error category.
"""

from __future__ import annotations


class ExportError(Exception):
    """Base class for all exporter failures."""


class InvalidJob(ExportError):
    """An ExportJob field is out of range or malformed."""


class UnknownModelTag(ExportError):
    """The requested model tag is not in the encoder registry."""


class EncoderUnavailable(ExportError):
    """A registered encoder backend could not be constructed locally."""


class InputFormatError(ExportError):
    """The input record file is malformed; messages carry 1-based line numbers."""
