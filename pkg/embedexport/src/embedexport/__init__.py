"""Batch embedding exporter for the tool-sequence toolkit's interchange format."""

from .encoders import (
    DEFAULT_MODEL_TAG,
    HASH_MODEL_TAG,
    HashingEncoder,
    SentenceTransformerEncoder,
    available_tags,
    create_encoder,
    register_encoder,
)
from .errors import (
    EncoderUnavailable,
    ExportError,
    InputFormatError,
    InvalidJob,
    UnknownModelTag,
)
from .export import (
    EmptyTextWarning,
    ExportJob,
    ExportResult,
    ZeroVectorWarning,
    export,
    read_records,
)

__all__ = [
    "DEFAULT_MODEL_TAG",
    "HASH_MODEL_TAG",
    "HashingEncoder",
    "SentenceTransformerEncoder",
    "available_tags",
    "create_encoder",
    "register_encoder",
    "EncoderUnavailable",
    "ExportError",
    "InputFormatError",
    "InvalidJob",
    "UnknownModelTag",
    "EmptyTextWarning",
    "ExportJob",
    "ExportResult",
    "ZeroVectorWarning",
    "export",
    "read_records",
]
