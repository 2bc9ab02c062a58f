#!/usr/bin/env python3
"""End-to-end pipeline demo: synthesize captioned images, extract features
with the built-in frozen backbones, then train the alignment engine on the
emitted stores. Exercises the full file contract between the two packages."""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from extract_adapters.extract import extract_text_features, extract_vision_features
from extract_adapters.manifest import ExtractionManifest, Pooling

PALETTE = {
    "red": (200, 40, 40), "green": (40, 180, 60), "blue": (40, 70, 200),
    "yellow": (220, 200, 40), "violet": (150, 60, 190),
}
SHAPES = ["square", "disk"]


def synthesize(workdir: Path, per_combo: int = 4):
    rng = np.random.default_rng(0)
    entries_img, entries_txt, pairs = [], [], []
    for color, rgb in PALETTE.items():
        for shape in SHAPES:
            for k in range(per_combo):
                img_id = f"{color}_{shape}_{k}"
                canvas = np.full((32, 32, 3), 245, dtype=np.uint8)
                cx, cy = rng.integers(10, 22, size=2)
                if shape == "square":
                    canvas[cx - 7:cx + 7, cy - 7:cy + 7] = rgb
                else:
                    yy, xx = np.ogrid[:32, :32]
                    canvas[(yy - cx) ** 2 + (xx - cy) ** 2 <= 49] = rgb
                path = workdir / f"{img_id}.png"
                Image.fromarray(canvas, mode="RGB").save(path)
                entries_img.append((img_id, str(path)))
                cap_id = f"cap_{img_id}"
                entries_txt.append((cap_id, f"a {color} {shape} on a pale background"))
                pairs.append((img_id, cap_id))
    return entries_img, entries_txt, pairs


def main():
    workdir = Path(tempfile.mkdtemp(prefix="pipeline_"))
    entries_img, entries_txt, pairs = synthesize(workdir)
    print(f"synthesized {len(entries_img)} captioned images under {workdir}")

    vision_store = workdir / "vision.fstore"
    text_store = workdir / "text.fstore"
    extract_vision_features(ExtractionManifest(
        entries=entries_img, model="tiny-test-vit", pooling=Pooling.CLS_TOKEN,
        output=vision_store, batch_size=8))
    extract_text_features(ExtractionManifest(
        entries=entries_txt, model="tiny-test-decoder", pooling=Pooling.LAST_TOKEN,
        output=text_store, batch_size=8))

    manifest = workdir / "pairs.tsv"
    manifest.write_text("".join(f"{i}\t{c}\n" for i, c in pairs))

    config = workdir / "train.json"
    config.write_text(f"""{{
  "data": {{"vision_store": "{vision_store}", "text_store": "{text_store}",
           "manifest": "{manifest}"}},
  "projection": {{"input_dim": 32, "hidden_dim": 64, "output_dim": 24,
                 "num_layers": 2, "dropout_p": 0.1, "seed": 1}},
  "train": {{"batch_size": 16, "max_steps": 150, "val_fraction": 0.1,
            "val_interval": 50, "seed": 0}}
}}""")
    print("extracted stores; handing off to the alignment engine")
    code = subprocess.call([sys.executable, "-m", "frozen_align.cli", "train",
                            "--config", str(config), "--out", str(workdir / "run")])
    sys.exit(code)


if __name__ == "__main__":
    main()
