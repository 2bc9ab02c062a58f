"""Format conformance: this package's writer must produce byte-identical
files to the consumer's golden fixtures, and everything it writes must pass
the consumer's store validation."""

from pathlib import Path

import numpy as np
import pytest

from extract_adapters.errors import DimensionMismatch, DuplicateId, NonFiniteValue
from extract_adapters.storefmt import read_store, write_store

GOLDEN_DIR = Path(__file__).resolve().parents[2] / "tests" / "golden"


def golden_vision_records():
    for i in range(5):
        yield f"sample_{i:03d}", np.array(
            [(i + 1) * 0.25 - j * 1.5 for j in range(4)], dtype=np.float32)


def golden_text_records():
    for i in range(4):
        yield f"txt_{i:03d}", np.array(
            [i * 0.5 + j * 0.125 for j in range(3)], dtype=np.float32)


def test_vision_golden_byte_identical(tmp_path):
    out = tmp_path / "vision.fstore"
    write_store(golden_vision_records(), 4, "vision", out)
    assert out.read_bytes() == (GOLDEN_DIR / "vision_golden.fstore").read_bytes()


def test_text_golden_byte_identical(tmp_path):
    out = tmp_path / "text.fstore"
    write_store(golden_text_records(), 3, "text", out)
    assert out.read_bytes() == (GOLDEN_DIR / "text_golden.fstore").read_bytes()


def test_written_store_passes_consumer_validation(tmp_path):
    frozen_align_store = pytest.importorskip("frozen_align.store")
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((11, 6)).astype(np.float32)
    out = tmp_path / "x.fstore"
    write_store(((f"r{k}", rows[k]) for k in range(11)), 6, "vision", out)
    handle = frozen_align_store.open_store(out)
    assert handle.count == 11 and handle.dim == 6
    assert handle.modality.value == "vision"
    for k in range(11):
        assert handle.get_by_id(f"r{k}").tobytes() == rows[k].tobytes()


def test_own_reader_roundtrip(tmp_path):
    rows = np.arange(12, dtype=np.float32).reshape(4, 3)
    out = tmp_path / "rt.fstore"
    write_store(((f"id{k}", rows[k]) for k in range(4)), 3, "text", out)
    header, ids, payload = read_store(out)
    assert header == {"version": 1, "dim": 3, "count": 4, "modality": "text"}
    assert ids == [f"id{k}" for k in range(4)]
    assert payload.tobytes() == rows.tobytes()


def test_writer_validation(tmp_path):
    with pytest.raises(DuplicateId):
        write_store([("a", np.zeros(2)), ("a", np.zeros(2))], 2, "text",
                    tmp_path / "d.fstore")
    with pytest.raises(NonFiniteValue):
        write_store([("a", np.array([np.nan, 1.0]))], 2, "text", tmp_path / "n.fstore")
    with pytest.raises(DimensionMismatch):
        write_store([("a", np.zeros(3))], 2, "text", tmp_path / "m.fstore")
