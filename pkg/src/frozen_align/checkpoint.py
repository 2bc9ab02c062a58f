"""Bit-exact checkpoint files.

Same conventions as the feature store: a fixed magic, little-endian sizes,
raw little-endian tensor payloads. A JSON meta block carries configs, step
counters, and RNG states; tensors follow in the order the meta lists them.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, IoFailure, TruncatedFile

MAGIC = b"FACKPT01"


def save_checkpoint(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    order = sorted(tensors)
    directory = [
        {"name": n, "dtype": tensors[n].dtype.newbyteorder("<").str,
         "shape": list(tensors[n].shape)}
        for n in order
    ]
    meta = dict(meta)
    meta["tensors"] = directory
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for n in order:
                fh.write(np.ascontiguousarray(tensors[n]).astype(
                    tensors[n].dtype.newbyteorder("<"), copy=False).tobytes())
    except OSError as exc:
        raise IoFailure(f"failed writing checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != MAGIC:
                raise BadMagic(f"{path}: magic {magic!r} != {MAGIC!r}")
            (meta_len,) = struct.unpack("<Q", fh.read(8))
            meta = json.loads(fh.read(meta_len).decode("utf-8"))
            tensors: dict[str, np.ndarray] = {}
            for entry in meta["tensors"]:
                dtype = np.dtype(entry["dtype"])
                shape = tuple(entry["shape"])
                nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
                raw = fh.read(nbytes)
                if len(raw) != nbytes:
                    raise TruncatedFile(f"{path}: tensor {entry['name']} truncated")
                tensors[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    except OSError as exc:
        raise IoFailure(f"failed reading checkpoint {path}: {exc}") from exc
    return meta, tensors
