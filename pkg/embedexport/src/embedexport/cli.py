"""Command-line entry point: embedexport --input records.jsonl --output vectors.jsonl."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .encoders import DEFAULT_MODEL_TAG, available_tags
from .errors import ExportError
from .export import ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedexport",
        description=(
            "Batch-encode line-delimited {id, text} records into the "
            "line-delimited {id, vector} embedding interchange format."
        ),
    )
    parser.add_argument(
        "--input", help="input file of line-delimited {id, text} JSON records"
    )
    parser.add_argument("--output", help="output embedding file to write")
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL_TAG,
        help=f"encoder model tag (default: {DEFAULT_MODEL_TAG})",
    )
    parser.add_argument(
        "--batch-size", type=int, default=32, help="texts per encoder call (default: 32)"
    )
    parser.add_argument(
        "--list-models",
        action="store_true",
        help="print the registered model tags and exit",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_models:
        for tag in available_tags():
            print(tag)
        return 0
    if args.input is None or args.output is None:
        parser.error("--input and --output are required")
    try:
        job = ExportJob(
            input_path=args.input,
            output_path=args.output,
            model_tag=args.model,
            batch_size=args.batch_size,
        )
        result = export(job)
    except ExportError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {result.rows} vectors (dimension {result.dimension}) "
        f"to {result.output_path}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
