"""Training loop: batch assembly with random caption sampling, contrastive
optimization of the text projection, validation-split convergence monitoring,
and resumable checkpoints.

Training counts optimization steps, not epochs; the sampler hands out
distinct images per batch and reshuffles its pool when exhausted. Vision
features pass through unchanged (identity) and are normalized; text features
go through the projection in train mode.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .contrastive import infonce_loss, normalize, normalize_backward
from .errors import BatchExceedsDataset, DimMismatch, NonFiniteLoss, TooSmall
from .optim import AdamConfig, AdamState, adam_step, clip_global_norm
from .projection import ProjectionConfig, ProjectionNet
from .store import PairedDataset


@dataclass(frozen=True)
class TrainConfig:
    projection: ProjectionConfig
    optimizer: AdamConfig = AdamConfig()
    batch_size: int = 16_384
    max_steps: int = 5_000
    val_fraction: float = 0.02
    val_interval: int = 100
    early_stop_patience: int = 5
    tau: float = 0.07
    clip_norm: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        # 0.0 disables the validation split (and early stopping) entirely;
        # tiny overfitting runs need every pair in training
        if not 0.0 <= self.val_fraction < 0.5:
            raise ValueError("val_fraction must be 0 or in (0, 0.5)")
        if self.max_steps < 0 or self.val_interval < 1 or self.early_stop_patience < 1:
            raise ValueError("max_steps >= 0, val_interval >= 1, patience >= 1 required")

    def to_dict(self) -> dict[str, Any]:
        return {
            "projection": self.projection.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "batch_size": self.batch_size, "max_steps": self.max_steps,
            "val_fraction": self.val_fraction, "val_interval": self.val_interval,
            "early_stop_patience": self.early_stop_patience,
            "tau": self.tau, "clip_norm": self.clip_norm, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainConfig":
        d = dict(d)
        d["projection"] = ProjectionConfig.from_dict(d["projection"])
        d["optimizer"] = AdamConfig.from_dict(d["optimizer"])
        return cls(**d)


@dataclass
class TrainReport:
    steps_run: int
    final_train_loss: float | None
    best_val_loss: float | None
    best_val_step: int | None
    wall_seconds: float
    checkpoint_path: str | None
    history: list[tuple[int, float, float | None]] = field(default_factory=list)
    net: "ProjectionNet | None" = None  # final-step net; not serialized

    def to_dict(self) -> dict[str, Any]:
        return {
            "steps_run": self.steps_run, "final_train_loss": self.final_train_loss,
            "best_val_loss": self.best_val_loss, "best_val_step": self.best_val_step,
            "wall_seconds": self.wall_seconds, "checkpoint_path": self.checkpoint_path,
        }


def split_train_val(
    dataset: PairedDataset, val_fraction: float, seed: int
) -> tuple[PairedDataset, PairedDataset]:
    """Disjoint image-id partition; validation keeps all captions of its images."""
    n = dataset.n_images
    if n == 0:
        raise TooSmall("dataset has no images")
    n_val = int(np.floor(n * val_fraction))
    if n_val == 0:
        raise TooSmall(f"val_fraction {val_fraction} of {n} images floors to zero")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    val_set = {dataset.image_ids[i] for i in perm[:n_val]}
    train_ids = [i for i in dataset.image_ids if i not in val_set]
    val_ids = [i for i in dataset.image_ids if i in val_set]
    return dataset.subset(train_ids), dataset.subset(val_ids)


def _gather(dataset: PairedDataset, image_ids: list[str], rng: np.random.Generator):
    """One uniformly sampled caption per image; features fetched from stores."""
    caption_ids = []
    for img in image_ids:
        caps = dataset.captions_per_image[img]
        caption_ids.append(caps[int(rng.integers(len(caps)))] if len(caps) > 1 else caps[0])
    vis = dataset.vision_store.get_rows(image_ids)
    txt = dataset.text_store.get_rows(caption_ids)
    return vis, txt


def sample_batch(
    dataset: PairedDataset, batch_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Draw a batch of distinct images, one random caption each."""
    n = dataset.n_images
    if batch_size > n:
        raise BatchExceedsDataset(f"batch_size {batch_size} > {n} training images")
    idx = rng.choice(n, size=batch_size, replace=False)
    image_ids = [dataset.image_ids[i] for i in idx]
    vis, txt = _gather(dataset, image_ids, rng)
    return vis, txt, image_ids


class PairSampler:
    """Pool-based sampler: distinct images per batch, reshuffle on exhaustion.

    A batch never straddles two shuffles, so images within one batch are
    always distinct (the partial remainder of a pool is discarded).
    """

    def __init__(self, dataset: PairedDataset, rng: np.random.Generator):
        self.dataset = dataset
        self.rng = rng
        self.pool = rng.permutation(dataset.n_images)
        self.cursor = 0

    def next_batch(self, batch_size: int):
        n = self.dataset.n_images
        if batch_size > n:
            raise BatchExceedsDataset(f"batch_size {batch_size} > {n} training images")
        if self.cursor + batch_size > n:
            self.pool = self.rng.permutation(n)
            self.cursor = 0
        idx = self.pool[self.cursor:self.cursor + batch_size]
        self.cursor += batch_size
        image_ids = [self.dataset.image_ids[i] for i in idx]
        vis, txt = _gather(self.dataset, image_ids, self.rng)
        return vis, txt, image_ids

    def get_state(self) -> dict:
        return {"rng_state": self.rng.bit_generator.state, "cursor": self.cursor}

    def set_state(self, state: dict, pool: np.ndarray) -> None:
        self.rng.bit_generator.state = state["rng_state"]
        self.cursor = int(state["cursor"])
        self.pool = pool.astype(np.int64)


def validation_loss(net: ProjectionNet, val_set: PairedDataset, tau: float) -> float:
    """Contrastive loss on the held-out pairs, eval mode, first caption per
    image so checks are deterministic and comparable across steps."""
    image_ids = val_set.image_ids
    caption_ids = [val_set.captions_per_image[i][0] for i in image_ids]
    vis = val_set.vision_store.get_rows(image_ids)
    txt = val_set.text_store.get_rows(caption_ids)
    out, _ = net.forward(txt, train=False)
    return infonce_loss(normalize(vis), normalize(out), tau).total_loss


def _train_state_tensors(net: ProjectionNet, adam: AdamState, sampler: PairSampler):
    tensors: dict[str, np.ndarray] = {}
    for k, p in net.params.items():
        tensors[f"param/{k}"] = p
    for k, r in net.running.items():
        tensors[f"running/{k}"] = r
    for k, m in adam.m.items():
        tensors[f"adam_m/{k}"] = m
    for k, v in adam.v.items():
        tensors[f"adam_v/{k}"] = v
    tensors["sampler/pool"] = np.asarray(sampler.pool, dtype=np.int64)
    return tensors


def save_train_checkpoint(path, config: TrainConfig, step: int, net: ProjectionNet,
                          adam: AdamState, sampler: PairSampler, extra: dict) -> None:
    meta = {
        "kind": "train_state",
        "config": config.to_dict(),
        "step": step,
        "adam_t": adam.t,
        "dropout_rng_state": net.rng.bit_generator.state,
        "sampler": sampler.get_state(),
        **extra,
    }
    save_checkpoint(path, meta, _train_state_tensors(net, adam, sampler))


def load_net(path) -> tuple[ProjectionNet, dict]:
    """Rebuild a projection net (params + running stats + dropout RNG) from a
    checkpoint; returns (net, meta)."""
    meta, tensors = load_checkpoint(path)
    net = ProjectionNet(ProjectionConfig.from_dict(meta["config"]["projection"]))
    for k in net.params:
        net.params[k] = tensors[f"param/{k}"].copy()
    for k in net.running:
        net.running[k] = tensors[f"running/{k}"].copy()
    if "dropout_rng_state" in meta:
        net.rng.bit_generator.state = meta["dropout_rng_state"]
    return net, meta


def train(
    config: TrainConfig,
    dataset: PairedDataset,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> TrainReport:
    """Run the optimization loop until max_steps or validation convergence.

    Per step: sample batch -> project text (train mode) -> normalize both
    modalities -> contrastive loss -> backprop -> clip to the global norm ->
    Adam step. Every val_interval steps the validation loss is checked; the
    best-validation checkpoint is retained and training stops after
    early_stop_patience checks without improvement.
    """
    if dataset.text_store.dim != config.projection.input_dim:
        raise DimMismatch(
            f"text store dim {dataset.text_store.dim} != projection input "
            f"{config.projection.input_dim}"
        )
    if dataset.vision_store.dim != config.projection.output_dim:
        raise DimMismatch(
            f"vision store dim {dataset.vision_store.dim} != projection output "
            f"{config.projection.output_dim}"
        )
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    if config.val_fraction > 0.0:
        train_set, val_set = split_train_val(dataset, config.val_fraction, config.seed)
    else:
        train_set, val_set = dataset, None
    net = ProjectionNet(config.projection)
    adam = AdamState.init(net.params, config.optimizer)
    sampler = PairSampler(train_set, np.random.default_rng(config.seed))

    start_step = 0
    best_val = None
    best_val_step = None
    checks_since_best = 0
    if resume_from is not None:
        meta, tensors = load_checkpoint(resume_from)
        for k in net.params:
            net.params[k] = tensors[f"param/{k}"].copy()
        for k in net.running:
            net.running[k] = tensors[f"running/{k}"].copy()
        for k in adam.m:
            adam.m[k] = tensors[f"adam_m/{k}"].copy()
            adam.v[k] = tensors[f"adam_v/{k}"].copy()
        adam.t = int(meta["adam_t"])
        net.rng.bit_generator.state = meta["dropout_rng_state"]
        sampler.set_state(meta["sampler"], tensors["sampler/pool"])
        start_step = int(meta["step"])
        best_val = meta.get("best_val_loss")
        best_val_step = meta.get("best_val_step")
        checks_since_best = int(meta.get("checks_since_best", 0))

    history: list[tuple[int, float, float | None]] = []
    train_loss = None
    t0 = time.perf_counter()
    best_path = out_dir / "checkpoint_best.ckpt" if out_dir is not None else None
    last_path = out_dir / "checkpoint_last.ckpt" if out_dir is not None else None

    def _bookkeeping():
        return {"best_val_loss": best_val, "best_val_step": best_val_step,
                "checks_since_best": checks_since_best}

    step = start_step
    for step in range(start_step + 1, config.max_steps + 1):
        vis, txt, _ = sampler.next_batch(config.batch_size)
        out, cache = net.forward(txt, train=True)
        loss_out = infonce_loss(normalize(vis), normalize(out), config.tau)
        train_loss = loss_out.total_loss
        if not np.isfinite(train_loss):
            raise NonFiniteLoss(
                f"step {step}: loss={train_loss} "
                f"(t2i={loss_out.loss_t2i}, i2t={loss_out.loss_i2t})"
            )
        grad_out = normalize_backward(loss_out.grad_z_txt, out)
        grads = net.backward(cache, grad_out)
        grads, _ = clip_global_norm(grads, config.clip_norm)
        adam_step(net.params, grads, adam, net.decay_exempt_names())

        val_loss = None
        if val_set is not None and step % config.val_interval == 0:
            val_loss = validation_loss(net, val_set, config.tau)
            if best_val is None or val_loss < best_val:
                best_val = val_loss
                best_val_step = step
                checks_since_best = 0
                if best_path is not None:
                    save_train_checkpoint(best_path, config, step, net, adam, sampler,
                                          _bookkeeping())
            else:
                checks_since_best += 1
        history.append((step, train_loss, val_loss))
        if checks_since_best >= config.early_stop_patience:
            break

    wall = time.perf_counter() - t0
    if last_path is not None:
        save_train_checkpoint(last_path, config, step, net, adam, sampler, _bookkeeping())
        if not best_path.exists():
            # no validation check ran (e.g. max_steps < val_interval)
            save_train_checkpoint(best_path, config, step, net, adam, sampler, _bookkeeping())
        _write_log(out_dir / "train_log.csv", history)
    checkpoint_path = str(best_path) if best_path is not None else None
    return TrainReport(
        steps_run=step - start_step if config.max_steps > start_step else 0,
        final_train_loss=train_loss,
        best_val_loss=best_val,
        best_val_step=best_val_step,
        wall_seconds=wall,
        checkpoint_path=checkpoint_path,
        history=history,
        net=net,
    )


def _write_log(path: Path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,train_loss,val_loss\n")
        for step, tl, vl in history:
            fh.write(f"{step},{tl:.8f},{'' if vl is None else f'{vl:.8f}'}\n")
