#!/usr/bin/env python3
"""Overfitting sanity experiment: 8 pairs where the caption feature is the
image feature (tiled) plus noise. A healthy engine drives the train loss
near zero and retrieves every image from its own caption at rank 1."""

import tempfile
from pathlib import Path

import numpy as np

from frozen_align.contrastive import normalize
from frozen_align.optim import AdamConfig
from frozen_align.projection import ProjectionConfig
from frozen_align.store import Modality, build_pairs, open_store, write_store
from frozen_align.trainer import TrainConfig, train


def main():
    rng = np.random.default_rng(0)
    vis = rng.standard_normal((8, 8)).astype(np.float32)
    txt = (np.tile(vis, (1, 2)) + 0.1 * rng.standard_normal((8, 16))).astype(np.float32)

    workdir = Path(tempfile.mkdtemp(prefix="overfit_"))
    write_store(((f"img{i}", vis[i]) for i in range(8)), 8, Modality.VISION,
                workdir / "v.fstore")
    write_store(((f"cap{i}", txt[i]) for i in range(8)), 16, Modality.TEXT,
                workdir / "t.fstore")
    (workdir / "pairs.tsv").write_text(
        "".join(f"img{i}\tcap{i}\n" for i in range(8)))
    ds = build_pairs(open_store(workdir / "v.fstore"), open_store(workdir / "t.fstore"),
                     workdir / "pairs.tsv")

    cfg = TrainConfig(
        projection=ProjectionConfig(16, 64, 8, num_layers=2, dropout_p=0.0, seed=1),
        optimizer=AdamConfig(),
        batch_size=8, max_steps=500, val_fraction=0.0, tau=0.07, seed=0,
    )
    report = train(cfg, ds)

    out, _ = report.net.forward(txt, train=False)
    sims = normalize(out).data @ normalize(vis).data.T
    hits = int(np.sum(np.argmax(sims, axis=1) == np.arange(8)))
    print(f"steps: {report.steps_run}  final train loss: {report.final_train_loss:.5f}")
    print(f"top-1 self-retrieval: {hits}/8")
    print(f"wall: {report.wall_seconds:.2f}s")


if __name__ == "__main__":
    main()
