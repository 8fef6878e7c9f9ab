import json

import pytest

from embedexport import encoders


@pytest.fixture
def registry_guard():
    """Snapshot the encoder registry so tests can register throwaway backends."""
    saved = dict(encoders._FACTORIES)
    yield
    encoders._FACTORIES.clear()
    encoders._FACTORIES.update(saved)


@pytest.fixture
def write_records(tmp_path):
    """Write (id, text) pairs as a line-delimited JSON input file."""

    def _write(rows, name="records.jsonl"):
        path = tmp_path / name
        lines = [json.dumps({"id": rid, "text": text}) for rid, text in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write
