"""Seen/unseen generalization benchmark.

Classes are split into disjoint seen (S) and unseen (U) sets. The projection
trains on images of seen classes supervised by their class texts (one text
sampled uniformly per iteration, mirroring caption sampling), then is scored
as averaged per-class accuracy on unseen classes only. Feature reads during
training are instrumented so any touch of U-class material fails loudly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .class_reps import ClassRepresentationSet, build_classifier
from .errors import (
    CountMismatch,
    EmptyClass,
    IoFailure,
    LeakDetected,
    MissingDataset,
    MissingEmbedding,
    OverlapDetected,
)
from .store import PairedDataset, StoreHandle
from .trainer import TrainConfig, load_net, train
from .zeroshot import eval_classification


@dataclass(frozen=True)
class ViterbSplit:
    dataset: str
    seen: tuple[str, ...]
    unseen: tuple[str, ...]
    provenance: str  # "published-split file ..." or "seeded random assignment ..."

    def __post_init__(self):
        if not self.seen or not self.unseen:
            raise CountMismatch(f"{self.dataset}: both seen and unseen must be non-empty")
        overlap = set(self.seen) & set(self.unseen)
        if overlap:
            raise OverlapDetected(
                f"{self.dataset}: classes in both seen and unseen: {sorted(overlap)[:5]}"
            )


@dataclass
class ViterbEntry:
    dataset: str
    unseen_per_class_acc: float
    steps_run: int


@dataclass
class ViterbResult:
    per_dataset: dict[str, float]
    overall_mean: float
    representation_kind: str = ""

    def to_dict(self) -> dict:
        return {"per_dataset": self.per_dataset, "overall_mean": self.overall_mean,
                "representation_kind": self.representation_kind}

    def render(self) -> str:
        lines = [f"{name:24s} {acc:6.2f}" for name, acc in self.per_dataset.items()]
        lines.append(f"{'mean':24s} {self.overall_mean:6.2f}")
        return "\n".join(lines)


def load_split_file(path: str | Path, dataset: str = "") -> ViterbSplit:
    """Versioned text format: one class id per line under `seen` / `unseen`
    headers."""
    seen: list[str] = []
    unseen: list[str] = []
    section: list[str] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.strip()
            if not token or token.startswith("#"):
                continue
            if token.lower() == "seen":
                section = seen
            elif token.lower() == "unseen":
                section = unseen
            elif section is None:
                raise IoFailure(f"{path}:{lineno}: class id before a seen/unseen header")
            else:
                section.append(token)
    return ViterbSplit(dataset or Path(path).stem, tuple(seen), tuple(unseen),
                       provenance=f"published split file {path}")


def write_split_file(split: ViterbSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("seen\n")
        fh.writelines(f"{c}\n" for c in split.seen)
        fh.write("unseen\n")
        fh.writelines(f"{c}\n" for c in split.unseen)


def make_random_split(
    dataset: str, classes: Sequence[str], n_seen: int, n_unseen: int, seed: int
) -> ViterbSplit:
    """Deterministic random assignment of classes into seen/unseen."""
    if len(set(classes)) != len(classes):
        raise CountMismatch(f"{dataset}: duplicate class ids in class list")
    if n_seen < 1 or n_unseen < 1 or n_seen + n_unseen > len(classes):
        raise CountMismatch(
            f"{dataset}: cannot take {n_seen} seen + {n_unseen} unseen from "
            f"{len(classes)} classes"
        )
    perm = np.random.default_rng(seed).permutation(len(classes))
    seen = tuple(classes[i] for i in perm[:n_seen])
    unseen = tuple(classes[i] for i in perm[n_seen:n_seen + n_unseen])
    return ViterbSplit(dataset, seen, unseen,
                       provenance=f"seeded random assignment (seed={seed})")


def load_or_make_split(dataset: str, spec: dict) -> ViterbSplit:
    """spec is either {"file": path} or
    {"classes": [...] | "classes_file": path, "n_seen": k, "n_unseen": m, "seed": s}."""
    if "file" in spec:
        return load_split_file(spec["file"], dataset)
    if "classes_file" in spec:
        with open(spec["classes_file"], "r", encoding="utf-8") as fh:
            classes = [line.strip() for line in fh if line.strip()]
    else:
        classes = list(spec["classes"])
    return make_random_split(dataset, classes, int(spec["n_seen"]),
                             int(spec["n_unseen"]), int(spec["seed"]))


class TrackingStore:
    """Store proxy that records every id whose features are read."""

    def __init__(self, inner: StoreHandle):
        self.inner = inner
        self.accessed: set[str] = set()

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def count(self) -> int:
        return self.inner.count

    @property
    def modality(self):
        return self.inner.modality

    @property
    def ids(self):
        return self.inner.ids

    def has(self, rid: str) -> bool:
        return self.inner.has(rid)

    def get_by_id(self, rid: str) -> np.ndarray:
        self.accessed.add(rid)
        return self.inner.get_by_id(rid)

    def get_rows(self, rids) -> np.ndarray:
        self.accessed.update(rids)
        return self.inner.get_rows(rids)

    def iter_batches(self, batch_size: int) -> Iterator:
        for ids, mat in self.inner.iter_batches(batch_size):
            self.accessed.update(ids)
            yield ids, mat


def run_viterb(
    split: ViterbSplit,
    vision_store: StoreHandle,
    train_labels: Sequence[tuple[str, str]],
    eval_labels: Sequence[tuple[str, str]],
    reps: ClassRepresentationSet,
    text_store: StoreHandle,
    config: TrainConfig,
    out_dir: str | Path | None = None,
) -> ViterbEntry:
    """Train on seen-class images against their class texts, then score
    averaged per-class accuracy over the unseen classes.

    Raises LeakDetected if any training image is labeled outside S, or if
    the instrumented feature reads during training touched an unseen-class
    image or an unseen class's representation texts.
    """
    seen = set(split.seen)
    unseen = set(split.unseen)
    for c in seen | unseen:
        if c not in reps.texts_per_class:
            raise MissingEmbedding(f"no class representations for {c!r}")

    contaminated = sorted({c for _, c in train_labels if c not in seen})
    if contaminated:
        raise LeakDetected(
            f"{split.dataset}: training images labeled outside seen classes: "
            f"{contaminated[:5]}"
        )

    unseen_rep_ids = {rid for c in unseen for rid in reps.texts_per_class[c]}
    unseen_image_ids = {img for img, c in eval_labels if c in unseen}
    unseen_image_ids.update(img for img, c in train_labels if c in unseen)

    tracked_vision = TrackingStore(vision_store)
    tracked_text = TrackingStore(text_store)
    dataset = PairedDataset(
        image_ids=[img for img, _ in train_labels],
        captions_per_image={img: list(reps.texts_per_class[c]) for img, c in train_labels},
        vision_store=tracked_vision,
        text_store=tracked_text,
    )
    report = train(config, dataset, out_dir=out_dir)

    leaked_imgs = tracked_vision.accessed & unseen_image_ids
    leaked_txts = tracked_text.accessed & unseen_rep_ids
    if leaked_imgs or leaked_txts:
        raise LeakDetected(
            f"{split.dataset}: training touched unseen-class material "
            f"(images: {sorted(leaked_imgs)[:3]}, texts: {sorted(leaked_txts)[:3]})"
        )

    if out_dir is not None:
        net, _ = load_net(Path(out_dir) / "checkpoint_best.ckpt")
    else:
        net = report.net
    unseen_reps = ClassRepresentationSet(
        classes=list(split.unseen),
        texts_per_class={c: list(reps.texts_per_class[c]) for c in split.unseen},
        kind=reps.kind,
    )
    classifier = build_classifier(unseen_reps, net, text_store)
    eval_pairs = [(img, c) for img, c in eval_labels if c in unseen]
    if not eval_pairs:
        raise EmptyClass(f"{split.dataset}: no evaluation images of unseen classes")
    feats = vision_store.get_rows([img for img, _ in eval_pairs])
    rep_eval = eval_classification(
        feats, [c for _, c in eval_pairs], classifier,
        mode="per_class_mean", dataset=split.dataset,
    )
    return ViterbEntry(split.dataset, rep_eval.metrics["per_class_mean"], report.steps_run)


def aggregate(entries: Sequence[ViterbEntry], expected_datasets: Sequence[str],
              representation_kind: str = "") -> ViterbResult:
    """Unweighted mean over exactly the configured dataset set."""
    got = {e.dataset for e in entries}
    expected = set(expected_datasets)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise MissingDataset(f"missing datasets: {missing}, unexpected: {extra}")
    per_dataset = {e.dataset: e.unseen_per_class_acc for e in entries}
    mean = float(np.mean([per_dataset[d] for d in expected_datasets]))
    return ViterbResult(per_dataset, mean, representation_kind)
