"""Evaluation suite: zero-shot classification, retrieval Recall@K, paired
compositional-matching scores, and binary caption choice.

All comparisons that decide correctness use strict inequalities, so exact
ties count as failures. Ranking ties break toward the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .class_reps import ClassifierMatrix, score_classes_batch
from .contrastive import normalize
from .errors import EmptyClass, IoFailure, KExceedsCorpus, MissingEmbedding
from .projection import ProjectionNet
from .store import StoreHandle


@dataclass
class EvalReport:
    task: str
    dataset: str
    metrics: dict[str, float]  # percentages
    sample_count: int
    config_digest: str = ""

    def to_dict(self) -> dict:
        return {"task": self.task, "dataset": self.dataset, "metrics": self.metrics,
                "sample_count": self.sample_count, "config_digest": self.config_digest}

    def render(self) -> str:
        width = max(len(k) for k in self.metrics)
        lines = [f"task: {self.task}   dataset: {self.dataset}   n={self.sample_count}"]
        for k, v in self.metrics.items():
            lines.append(f"  {k.ljust(width)}  {v:6.2f}")
        return "\n".join(lines)


def embed_images(store: StoreHandle, ids: Sequence[str]) -> np.ndarray:
    """Vision side is the identity followed by normalization."""
    missing = [i for i in ids if not store.has(i)]
    if missing:
        raise MissingEmbedding(f"missing image embeddings: {missing[:5]}")
    return normalize(store.get_rows(ids)).data


def embed_texts(net: ProjectionNet | None, store: StoreHandle, ids: Sequence[str]) -> np.ndarray:
    """Project stored text features (eval mode) and normalize."""
    missing = [i for i in ids if not store.has(i)]
    if missing:
        raise MissingEmbedding(f"missing text embeddings: {missing[:5]}")
    feats = store.get_rows(ids)
    if net is not None:
        feats, _ = net.forward(feats, train=False)
    return normalize(feats).data


def eval_classification(
    image_features: np.ndarray,
    labels: Sequence[str],
    classifier: ClassifierMatrix,
    mode: str = "top1",
    dataset: str = "",
) -> EvalReport:
    """Zero-shot classification accuracy.

    top1: fraction of samples whose argmax class matches the label.
    per_class_mean: unweighted mean over classes of within-class accuracy.
    """
    if mode not in ("top1", "per_class_mean"):
        raise ValueError(f"unknown mode {mode!r}")
    class_index = {c: i for i, c in enumerate(classifier.classes)}
    try:
        y = np.array([class_index[l] for l in labels])
    except KeyError as exc:
        raise MissingEmbedding(f"label {exc.args[0]!r} not among classifier classes") from None
    z = normalize(np.asarray(image_features)).data
    preds = np.argmax(score_classes_batch(z, classifier), axis=1)
    metrics: dict[str, float] = {}
    if mode == "top1":
        metrics["top1"] = float(100.0 * np.mean(preds == y))
    else:
        per_class = []
        for ci, c in enumerate(classifier.classes):
            sel = y == ci
            if not np.any(sel):
                raise EmptyClass(f"class {c!r} has no evaluation samples")
            per_class.append(float(np.mean(preds[sel] == ci)))
        metrics["per_class_mean"] = float(100.0 * np.mean(per_class))
    return EvalReport("classification", dataset, metrics, len(labels))


def _topk_hits_rowwise(sims: np.ndarray, targets: np.ndarray, k: int) -> np.ndarray:
    """For each row, is the target column among the k best (stable ties)?"""
    order = np.argsort(-sims, axis=1, kind="stable")
    hits = np.zeros(sims.shape[0], dtype=bool)
    for r in range(sims.shape[0]):
        hits[r] = targets[r] in order[r, :k]
    return hits


def eval_retrieval(
    image_features: np.ndarray,
    text_features: np.ndarray,
    text_to_image: Sequence[int],
    k: int,
    dataset: str = "",
) -> EvalReport:
    """Recall@K both ways over a bipartite pairing (texts may share an image).

    text->image: fraction of texts whose matched image ranks in the top K.
    image->text: fraction of images with any of their texts in the top K.
    """
    imgs = normalize(np.asarray(image_features)).data
    txts = normalize(np.asarray(text_features)).data
    t2i = np.asarray(text_to_image, dtype=np.int64)
    if k < 1:
        raise KExceedsCorpus("K must be >= 1")
    if k > imgs.shape[0] or k > txts.shape[0]:
        raise KExceedsCorpus(
            f"K={k} exceeds corpus ({imgs.shape[0]} images, {txts.shape[0]} texts)"
        )
    sims = txts @ imgs.T
    t2i_hits = _topk_hits_rowwise(sims, t2i, k)

    order = np.argsort(-sims.T, axis=1, kind="stable")  # per image, ranked texts
    image_ids = np.unique(t2i)
    i2t_hits = []
    for img in image_ids:
        matched = set(np.nonzero(t2i == img)[0].tolist())
        i2t_hits.append(any(int(t) in matched for t in order[img, :k]))
    metrics = {
        f"t2i_recall@{k}": float(100.0 * np.mean(t2i_hits)),
        f"i2t_recall@{k}": float(100.0 * np.mean(i2t_hits)),
    }
    return EvalReport("retrieval", dataset, metrics, len(t2i))


@dataclass(frozen=True)
class WinogroundItem:
    """Two images and two captions; (c0, i0) and (c1, i1) are the matches."""
    i0: str
    i1: str
    c0: str
    c1: str


def eval_winoground(
    items: Sequence[WinogroundItem],
    net: ProjectionNet | None,
    vision_store: StoreHandle,
    text_store: StoreHandle,
    dataset: str = "",
    verbose: bool = False,
) -> EvalReport:
    """Paired-inequality compositional test.

    text:  s(c0,i0) > s(c1,i0) and s(c1,i1) > s(c0,i1)
    image: s(c0,i0) > s(c0,i1) and s(c1,i1) > s(c1,i0)
    group: both
    """
    zi0 = embed_images(vision_store, [it.i0 for it in items])
    zi1 = embed_images(vision_store, [it.i1 for it in items])
    zc0 = embed_texts(net, text_store, [it.c0 for it in items])
    zc1 = embed_texts(net, text_store, [it.c1 for it in items])
    s00 = np.sum(zc0 * zi0, axis=1)
    s01 = np.sum(zc0 * zi1, axis=1)
    s10 = np.sum(zc1 * zi0, axis=1)
    s11 = np.sum(zc1 * zi1, axis=1)
    text_ok = (s00 > s10) & (s11 > s01)
    image_ok = (s00 > s01) & (s11 > s10)
    group_ok = text_ok & image_ok
    if verbose:
        for n, it in enumerate(items):
            print(f"item {n} ({it.i0},{it.i1},{it.c0},{it.c1}): "
                  f"text={bool(text_ok[n])} image={bool(image_ok[n])} group={bool(group_ok[n])}")
    metrics = {
        "text": float(100.0 * text_ok.mean()),
        "image": float(100.0 * image_ok.mean()),
        "group": float(100.0 * group_ok.mean()),
    }
    return EvalReport("winoground", dataset, metrics, len(items))


@dataclass(frozen=True)
class CaptionChoiceItem:
    image: str
    positive: str
    negative: str


def eval_caption_choice(
    items: Sequence[CaptionChoiceItem],
    net: ProjectionNet | None,
    vision_store: StoreHandle,
    text_store: StoreHandle,
    dataset: str = "",
) -> EvalReport:
    """Binary choice: correct iff the positive caption strictly outscores the
    negative one."""
    zi = embed_images(vision_store, [it.image for it in items])
    zp = embed_texts(net, text_store, [it.positive for it in items])
    zn = embed_texts(net, text_store, [it.negative for it in items])
    correct = np.sum(zi * zp, axis=1) > np.sum(zi * zn, axis=1)
    return EvalReport(
        "caption_choice", dataset, {"accuracy": float(100.0 * correct.mean())}, len(items)
    )


# --- manifest loaders ---

def load_label_manifest(path: str | Path) -> list[tuple[str, str]]:
    """`image_id<TAB>class_id` lines."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IoFailure(f"{path}:{lineno}: expected `image<TAB>class`")
            out.append((parts[0], parts[1]))
    return out


def load_winoground_manifest(path: str | Path) -> list[WinogroundItem]:
    """`i0<TAB>i1<TAB>c0<TAB>c1` lines."""
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise IoFailure(f"{path}:{lineno}: expected four tab-separated ids")
            items.append(WinogroundItem(*parts))
    return items


def load_caption_choice_manifest(path: str | Path) -> list[CaptionChoiceItem]:
    """`image<TAB>positive<TAB>negative` lines."""
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise IoFailure(f"{path}:{lineno}: expected three tab-separated ids")
            items.append(CaptionChoiceItem(*parts))
    return items
