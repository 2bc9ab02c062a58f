"""Extraction manifests: what to embed, with which model, into which store."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import DuplicateId, IoFailure


class Pooling(str, Enum):
    CLS_TOKEN = "cls_token"
    LAST_TOKEN = "last_token"
    MEAN_TOKEN = "mean_token"


@dataclass
class ExtractionManifest:
    """Inputs are (id, content) pairs; content is a caption string for text
    extraction or an image path for vision extraction."""

    entries: list[tuple[str, str]]
    model: str
    pooling: Pooling
    output: Path
    batch_size: int = 8
    device: str = "cpu"

    def __post_init__(self):
        self.pooling = Pooling(self.pooling)
        self.output = Path(self.output)
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        seen = set()
        for rid, _ in self.entries:
            if rid in seen:
                raise DuplicateId(f"duplicate id {rid!r} in manifest")
            seen.add(rid)


def load_entries(path: str | Path) -> list[tuple[str, str]]:
    """`id<TAB>content` lines; content may itself contain tabs only for text
    (first tab splits)."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise IoFailure(f"{path}:{lineno}: expected `id<TAB>content`")
            rid, content = line.split("\t", 1)
            entries.append((rid, content))
    return entries
