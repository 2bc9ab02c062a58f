#!/usr/bin/env python3
"""Regenerate the golden feature-store fixtures under tests/golden/.

Values are dyadic rationals, so the float32 payload is bit-identical on any
platform; any conforming writer must reproduce these files byte for byte.
"""

from pathlib import Path

import numpy as np

from frozen_align.store import Modality, write_store

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"


def golden_vision_records():
    for i in range(5):
        vec = np.array([(i + 1) * 0.25 - j * 1.5 for j in range(4)], dtype=np.float32)
        yield f"sample_{i:03d}", vec


def golden_text_records():
    for i in range(4):
        vec = np.array([i * 0.5 + j * 0.125 for j in range(3)], dtype=np.float32)
        yield f"txt_{i:03d}", vec


def write_golden(out_dir: Path = GOLDEN_DIR) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    vision = out_dir / "vision_golden.fstore"
    text = out_dir / "text_golden.fstore"
    write_store(golden_vision_records(), 4, Modality.VISION, vision)
    write_store(golden_text_records(), 3, Modality.TEXT, text)
    return vision, text


if __name__ == "__main__":
    for path in write_golden():
        print(f"wrote {path} ({path.stat().st_size} bytes)")
