"""Binary feature store: bit-exact storage for precomputed embeddings.

Layout (all integers little-endian):

    offset 0   magic            8 bytes, b"FSTORE01"
    offset 8   version          u32 (currently 1)
    offset 12  dim              u32
    offset 16  count            u64
    offset 24  modality         u32 (0 = vision, 1 = text)
    offset 28  id_table_offset  u64
    offset 36  reserved         12 zero bytes
    offset 48  payload          count * dim float32 values, row-major
    ...        id table         (count + 1) u64 offsets into a UTF-8 blob,
                                followed by the blob itself

The payload is a contiguous float32 matrix so readers can memory-map it
and take zero-copy batch views. Ids live in a trailing string table with
fixed-width offsets; id i occupies blob[offsets[i]:offsets[i + 1]].
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateId,
    EmptyCaptionList,
    IoFailure,
    NonFiniteValue,
    TruncatedFile,
    UnresolvedId,
    VersionUnsupported,
)

MAGIC = b"FSTORE01"
VERSION = 1
_HEADER_STRUCT = struct.Struct("<8sIIQIQ12x")
HEADER_SIZE = _HEADER_STRUCT.size  # 48


class Modality(str, Enum):
    VISION = "vision"
    TEXT = "text"

    @property
    def code(self) -> int:
        return 0 if self is Modality.VISION else 1

    @classmethod
    def from_code(cls, code: int) -> "Modality":
        if code == 0:
            return cls.VISION
        if code == 1:
            return cls.TEXT
        raise TruncatedFile(f"unknown modality code {code}")


@dataclass(frozen=True)
class FeatureStoreHeader:
    magic: bytes
    version: int
    dim: int
    count: int
    modality: Modality
    id_table_offset: int

    def pack(self) -> bytes:
        return _HEADER_STRUCT.pack(
            self.magic, self.version, self.dim, self.count,
            self.modality.code, self.id_table_offset,
        )

    @classmethod
    def unpack(cls, raw: bytes) -> "FeatureStoreHeader":
        magic, version, dim, count, modality_code, id_table_offset = _HEADER_STRUCT.unpack(raw)
        return cls(magic, version, dim, count, Modality.from_code(modality_code), id_table_offset)


@dataclass(frozen=True)
class FeatureRecord:
    id: str
    vector: np.ndarray


def write_store(
    records: Iterable[FeatureRecord | tuple[str, np.ndarray]],
    dim: int,
    modality: Modality | str,
    path: str | Path,
) -> FeatureStoreHeader:
    """Stream records to a new store file; validates at the producer.

    Accepts FeatureRecord objects or plain (id, vector) tuples. Vectors are
    converted to little-endian float32 (half/double inputs up-convert here).
    """
    if dim < 1:
        raise DimensionMismatch(f"dim must be >= 1, got {dim}")
    modality = Modality(modality)
    path = Path(path)
    seen: set[str] = set()
    ids: list[str] = []
    count = 0
    try:
        with open(path, "wb") as fh:
            fh.write(b"\x00" * HEADER_SIZE)  # patched after payload is known
            for rec in records:
                rid, vec = (rec.id, rec.vector) if isinstance(rec, FeatureRecord) else rec
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
                count += 1
            id_table_offset = HEADER_SIZE + count * dim * 4
            blobs = [rid.encode("utf-8") for rid in ids]
            offsets = np.zeros(count + 1, dtype="<u8")
            np.cumsum([len(b) for b in blobs], out=offsets[1:])
            fh.write(offsets.tobytes())
            for b in blobs:
                fh.write(b)
            header = FeatureStoreHeader(MAGIC, VERSION, dim, count, modality, id_table_offset)
            fh.seek(0)
            fh.write(header.pack())
    except OSError as exc:
        raise IoFailure(f"failed writing store {path}: {exc}") from exc
    except Exception:
        path.unlink(missing_ok=True)
        raise
    return header


class StoreHandle:
    """Read-only view of a store file: O(1) id lookup + streaming batches.

    The payload stays memory-mapped; only the id table is loaded eagerly.
    Immutable after writing, so handles are safe to share across readers.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            size = os.path.getsize(self.path)
            with open(self.path, "rb") as fh:
                raw = fh.read(HEADER_SIZE)
                if len(raw) < HEADER_SIZE:
                    raise TruncatedFile(f"{self.path}: file shorter than header")
                if raw[:8] != MAGIC:
                    raise BadMagic(f"{self.path}: magic {raw[:8]!r} != {MAGIC!r}")
                header = FeatureStoreHeader.unpack(raw)
                if header.version != VERSION:
                    raise VersionUnsupported(
                        f"{self.path}: version {header.version}, supported {VERSION}"
                    )
                if header.dim < 1:
                    raise TruncatedFile(f"{self.path}: dim {header.dim} < 1")
                payload_end = HEADER_SIZE + header.count * header.dim * 4
                if header.id_table_offset != payload_end:
                    raise TruncatedFile(
                        f"{self.path}: id table offset {header.id_table_offset} "
                        f"inconsistent with count*dim payload end {payload_end}"
                    )
                offsets_end = payload_end + 8 * (header.count + 1)
                if size < offsets_end:
                    raise TruncatedFile(f"{self.path}: file shorter than header implies")
                fh.seek(payload_end)
                offsets = np.frombuffer(fh.read(8 * (header.count + 1)), dtype="<u8")
                blob_len = int(offsets[-1]) if header.count else 0
                if size != offsets_end + blob_len:
                    raise TruncatedFile(
                        f"{self.path}: size {size} != expected {offsets_end + blob_len}"
                    )
                blob = fh.read(blob_len)
        except OSError as exc:
            raise IoFailure(f"failed opening store {path}: {exc}") from exc
        self.header = header
        self._ids = [
            blob[int(offsets[i]):int(offsets[i + 1])].decode("utf-8")
            for i in range(header.count)
        ]
        self._index = {rid: i for i, rid in enumerate(self._ids)}
        if header.count:
            self._payload = np.memmap(
                self.path, dtype="<f4", mode="r", offset=HEADER_SIZE,
                shape=(header.count, header.dim),
            )
        else:
            self._payload = np.empty((0, header.dim), dtype=np.float32)

    @property
    def dim(self) -> int:
        return self.header.dim

    @property
    def count(self) -> int:
        return self.header.count

    @property
    def modality(self) -> Modality:
        return self.header.modality

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def __len__(self) -> int:
        return self.header.count

    def __contains__(self, rid: str) -> bool:
        return rid in self._index

    def has(self, rid: str) -> bool:
        return rid in self._index

    def get_by_id(self, rid: str) -> np.ndarray:
        try:
            row = self._index[rid]
        except KeyError:
            raise UnresolvedId(f"{self.path}: no record {rid!r}") from None
        return np.array(self._payload[row], dtype=np.float32)

    def get_rows(self, rids: Sequence[str]) -> np.ndarray:
        try:
            rows = [self._index[r] for r in rids]
        except KeyError as exc:
            raise UnresolvedId(f"{self.path}: no record {exc.args[0]!r}") from None
        return np.array(self._payload[rows], dtype=np.float32)

    def iter_batches(self, batch_size: int) -> Iterator[tuple[list[str], np.ndarray]]:
        """Sequential pass over all records without loading the full payload."""
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        for start in range(0, self.count, batch_size):
            stop = min(start + batch_size, self.count)
            yield self._ids[start:stop], np.array(self._payload[start:stop], dtype=np.float32)


def open_store(path: str | Path) -> StoreHandle:
    if not Path(path).is_file():
        raise IoFailure(f"store file does not exist: {path}")
    return StoreHandle(path)


@dataclass
class PairedDataset:
    """Pairing of image-feature ids to one-or-more caption-feature ids."""

    image_ids: list[str]
    captions_per_image: dict[str, list[str]]
    vision_store: StoreHandle
    text_store: StoreHandle

    @property
    def n_images(self) -> int:
        return len(self.image_ids)

    @property
    def n_captions(self) -> int:
        return sum(len(v) for v in self.captions_per_image.values())

    def subset(self, image_ids: Sequence[str]) -> "PairedDataset":
        """View over a subset of images; keeps all captions of each image."""
        return PairedDataset(
            image_ids=list(image_ids),
            captions_per_image={i: self.captions_per_image[i] for i in image_ids},
            vision_store=self.vision_store,
            text_store=self.text_store,
        )


def parse_pair_manifest(path: str | Path) -> list[tuple[str, list[str]]]:
    """Parse `image_id<TAB>caption_id[,caption_id...]` lines."""
    entries: list[tuple[str, list[str]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IoFailure(f"{path}:{lineno}: expected `image<TAB>captions`, got {line!r}")
            image_id, caption_field = parts
            caption_ids = [c for c in caption_field.split(",") if c]
            entries.append((image_id, caption_ids))
    return entries


def build_pairs(
    vision_store: StoreHandle,
    text_store: StoreHandle,
    manifest: str | Path,
) -> PairedDataset:
    """Validate a pairing manifest against both stores."""
    image_ids: list[str] = []
    captions: dict[str, list[str]] = {}
    for image_id, caption_ids in parse_pair_manifest(manifest):
        if not caption_ids:
            raise EmptyCaptionList(f"image {image_id!r} has no caption ids")
        if image_id in captions:
            raise DuplicateId(f"image {image_id!r} listed twice in manifest")
        if not vision_store.has(image_id):
            raise UnresolvedId(f"image id {image_id!r} not in vision store")
        for cid in caption_ids:
            if not text_store.has(cid):
                raise UnresolvedId(f"caption id {cid!r} not in text store")
        image_ids.append(image_id)
        captions[image_id] = caption_ids
    return PairedDataset(image_ids, captions, vision_store, text_store)
