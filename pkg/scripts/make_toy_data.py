#!/usr/bin/env python3
"""Generate a synthetic paired dataset (stores + manifest + train config).

The toy construction plants a recoverable linear relation between caption and
image features, so a short training run visibly drops the loss. Useful for
exercising the CLI end to end without any real extraction:

    python scripts/make_toy_data.py --out toy_data
    frozen-align train --config toy_data/train.json --out toy_runs
"""

import argparse
import json
from pathlib import Path

import numpy as np

from frozen_align.store import Modality, write_store


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="toy_data")
    ap.add_argument("--images", type=int, default=512)
    ap.add_argument("--captions-per-image", type=int, default=3)
    ap.add_argument("--vision-dim", type=int, default=32)
    ap.add_argument("--text-dim", type=int, default=64)
    ap.add_argument("--noise", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lift = rng.standard_normal((args.vision_dim, args.text_dim))
    vis = rng.standard_normal((args.images, args.vision_dim)).astype(np.float32)

    vis_ids = [f"img{i:05d}" for i in range(args.images)]
    write_store(zip(vis_ids, vis), args.vision_dim, Modality.VISION, out / "vision.fstore")

    caption_records = []
    manifest_lines = []
    for i, img_id in enumerate(vis_ids):
        cap_ids = [f"cap{i:05d}_{k}" for k in range(args.captions_per_image)]
        for cid in cap_ids:
            txt = vis[i] @ lift + args.noise * rng.standard_normal(args.text_dim)
            caption_records.append((cid, txt.astype(np.float32)))
        manifest_lines.append(f"{img_id}\t{','.join(cap_ids)}\n")
    write_store(caption_records, args.text_dim, Modality.TEXT, out / "text.fstore")
    (out / "pairs.tsv").write_text("".join(manifest_lines))

    config = {
        "data": {
            "vision_store": str(out / "vision.fstore"),
            "text_store": str(out / "text.fstore"),
            "manifest": str(out / "pairs.tsv"),
        },
        "projection": {
            "input_dim": args.text_dim, "hidden_dim": 128,
            "output_dim": args.vision_dim, "num_layers": 4,
            "dropout_p": 0.2, "seed": args.seed,
        },
        "optimizer": {"lr": 1e-3, "weight_decay": 1e-4},
        "train": {
            "batch_size": min(128, args.images // 2), "max_steps": 400,
            "val_fraction": 0.05, "val_interval": 50, "early_stop_patience": 5,
            "tau": 0.07, "seed": args.seed,
        },
    }
    (out / "train.json").write_text(json.dumps(config, indent=2))
    print(f"wrote {args.images} images x {args.captions_per_image} captions under {out}/")
    print(f"train with: frozen-align train --config {out / 'train.json'} --out runs/toy")


if __name__ == "__main__":
    main()
