"""Writer for the shared feature-store binary format.

This is an independent implementation of the consumer's on-disk contract,
kept import-free of the alignment engine on purpose: conformance is proven
byte-for-byte against golden fixtures, not by sharing code.

Layout (little-endian throughout): a 48-byte header (magic "FSTORE01",
version u32, dim u32, count u64, modality u32, id-table offset u64, 12 zero
bytes), then count*dim float32 row-major payload, then (count+1) u64 offsets
into a trailing UTF-8 id blob.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DimensionMismatch, DuplicateId, IoFailure, NonFiniteValue

MAGIC = b"FSTORE01"
VERSION = 1
HEADER_STRUCT = struct.Struct("<8sIIQIQ12x")
HEADER_SIZE = HEADER_STRUCT.size

MODALITY_CODES = {"vision": 0, "text": 1}


def write_store(
    records: Iterable[tuple[str, np.ndarray]],
    dim: int,
    modality: str,
    path: str | Path,
) -> int:
    """Stream (id, vector) records into a store file; returns the count."""
    if dim < 1:
        raise DimensionMismatch(f"dim must be >= 1, got {dim}")
    code = MODALITY_CODES[modality]
    path = Path(path)
    ids: list[str] = []
    seen: set[str] = set()
    try:
        with open(path, "wb") as fh:
            fh.write(b"\x00" * HEADER_SIZE)
            for rid, vec in records:
                vec = np.asarray(vec)
                if vec.ndim != 1 or vec.shape[0] != dim:
                    raise DimensionMismatch(
                        f"record {rid!r} has shape {vec.shape}, expected ({dim},)"
                    )
                if rid in seen:
                    raise DuplicateId(f"duplicate record id {rid!r}")
                if not np.all(np.isfinite(vec)):
                    raise NonFiniteValue(f"record {rid!r} contains NaN or Inf")
                seen.add(rid)
                ids.append(rid)
                fh.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())
            count = len(ids)
            id_table_offset = HEADER_SIZE + count * dim * 4
            blobs = [rid.encode("utf-8") for rid in ids]
            offsets = np.zeros(count + 1, dtype="<u8")
            np.cumsum([len(b) for b in blobs], out=offsets[1:])
            fh.write(offsets.tobytes())
            for b in blobs:
                fh.write(b)
            fh.seek(0)
            fh.write(HEADER_STRUCT.pack(MAGIC, VERSION, dim, count, code, id_table_offset))
    except OSError as exc:
        raise IoFailure(f"failed writing store {path}: {exc}") from exc
    except Exception:
        path.unlink(missing_ok=True)
        raise
    return count


def read_store(path: str | Path) -> tuple[dict, list[str], np.ndarray]:
    """Self-check reader: returns (header fields, ids, payload matrix)."""
    path = Path(path)
    raw = path.read_bytes()
    magic, version, dim, count, code, id_table_offset = HEADER_STRUCT.unpack(
        raw[:HEADER_SIZE]
    )
    if magic != MAGIC or version != VERSION:
        raise IoFailure(f"{path}: not a supported store file")
    payload = np.frombuffer(
        raw, dtype="<f4", count=count * dim, offset=HEADER_SIZE
    ).reshape(count, dim)
    offsets = np.frombuffer(raw, dtype="<u8", count=count + 1, offset=id_table_offset)
    blob_start = id_table_offset + 8 * (count + 1)
    ids = [
        raw[blob_start + int(offsets[i]):blob_start + int(offsets[i + 1])].decode("utf-8")
        for i in range(count)
    ]
    header = {"version": version, "dim": dim, "count": count,
              "modality": "vision" if code == 0 else "text"}
    return header, ids, payload
