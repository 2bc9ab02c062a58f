"""Textual class representations and the zero-shot classifier built from them.

A class is represented by one or more texts (prompt-template expansions,
generated descriptions, or article sentences). Texts are embedded upstream;
here they are projected, normalized, and grouped per class. Aggregation
happens at score level: a class score is the mean similarity over its texts,
never a mean of embeddings (the two differ once embeddings are normalized).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .contrastive import normalize
from .errors import BadTemplate, DimMismatch, EmptyInput, MissingEmbedding
from .projection import ProjectionNet
from .store import StoreHandle


class RepKind(str, Enum):
    TEMPLATES = "templates"
    DESCRIPTION = "description"
    ARTICLE_SENTENCES = "article_sentences"


@dataclass
class ClassRepresentationSet:
    """Per-class lists of texts (strings at ingestion time, feature ids once
    embeddings exist)."""

    classes: list[str]
    texts_per_class: dict[str, list[str]]
    kind: RepKind

    def __post_init__(self):
        for c in self.classes:
            if not self.texts_per_class.get(c):
                raise EmptyInput(f"class {c!r} has no texts")

    def text_ids(self) -> dict[str, list[str]]:
        """Canonical feature ids for each class's texts."""
        return {
            c: [f"{c}::{k:04d}" for k in range(len(self.texts_per_class[c]))]
            for c in self.classes
        }

    def with_store_ids(self) -> "ClassRepresentationSet":
        """Replace texts with their canonical feature ids."""
        return ClassRepresentationSet(list(self.classes), self.text_ids(), self.kind)

    def write_extraction_manifest(self, path: str | Path) -> None:
        """`id<TAB>text` lines for the feature extraction adapters."""
        ids = self.text_ids()
        with open(path, "w", encoding="utf-8") as fh:
            for c in self.classes:
                for tid, text in zip(ids[c], self.texts_per_class[c]):
                    fh.write(f"{tid}\t{text}\n")


def expand_templates(class_names: list[str], templates: list[str]) -> ClassRepresentationSet:
    """Substitute every class name into every single-placeholder template."""
    for t in templates:
        if t.count("{}") != 1:
            raise BadTemplate(f"template {t!r} must contain exactly one {{}} placeholder")
    texts = {c: [t.replace("{}", c) for t in templates] for c in class_names}
    return ClassRepresentationSet(list(class_names), texts, RepKind.TEMPLATES)


# Tokens (lowercased, final period stripped) that do not end a sentence.
_ABBREVIATIONS = {
    "e.g", "i.e", "etc", "cf", "vs", "al", "approx", "ca",
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "no", "fig", "eq",
}
_BOUNDARY = re.compile(r"[.!?]+(?=\s|$)")


def split_sentences(article: str) -> list[str]:
    """Terminal-punctuation segmentation with abbreviation guards.

    Joining the result on single spaces reconstructs the input modulo
    whitespace.
    """
    if not article or not article.strip():
        raise EmptyInput("article is empty")
    sentences: list[str] = []
    start = 0
    for m in _BOUNDARY.finditer(article):
        end = m.end()
        tail = article[end:].lstrip()
        # only break before end-of-text or something that looks sentence-initial
        if tail and not (tail[0].isupper() or tail[0].isdigit() or tail[0] in "\"'(["):
            continue
        if "." in m.group():
            word_start = max(
                article.rfind(" ", 0, m.start()), article.rfind("\n", 0, m.start())
            ) + 1
            word = article[word_start:m.start()].lstrip("\"'([")
            # known abbreviations, plus capitalized single letters (name initials)
            if word.lower() in _ABBREVIATIONS or (len(word) == 1 and word.isupper()):
                continue
        chunk = article[start:end].strip()
        if chunk:
            sentences.append(chunk)
        start = end
    tail = article[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


@dataclass
class ClassifierMatrix:
    """Projected, normalized text embeddings grouped contiguously per class."""

    classes: list[str]
    rows: np.ndarray  # total_texts x d, unit rows
    class_slices: list[tuple[int, int]]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def rows_for(self, class_index: int) -> np.ndarray:
        a, b = self.class_slices[class_index]
        return self.rows[a:b]


def build_classifier(
    reps: ClassRepresentationSet,
    net: ProjectionNet | None,
    text_store: StoreHandle,
) -> ClassifierMatrix:
    """Embed every class text: fetch from the store, project (eval mode) when
    a net is given, L2-normalize, and group rows per class."""
    all_ids: list[str] = []
    slices: list[tuple[int, int]] = []
    for c in reps.classes:
        entries = reps.texts_per_class[c]
        missing = [e for e in entries if not text_store.has(e)]
        if missing:
            raise MissingEmbedding(
                f"class {c!r}: {len(missing)} texts without embeddings, "
                f"first missing id {missing[0]!r}"
            )
        slices.append((len(all_ids), len(all_ids) + len(entries)))
        all_ids.extend(entries)
    feats = text_store.get_rows(all_ids)
    if net is not None:
        feats, _ = net.forward(feats, train=False)
    rows = normalize(feats).data.astype(np.float32)
    return ClassifierMatrix(list(reps.classes), rows, slices)


def score_classes(z_img: np.ndarray, classifier: ClassifierMatrix) -> np.ndarray:
    """score(c) = mean over class texts of <z_img, z_text>."""
    z_img = np.asarray(z_img)
    if z_img.shape != (classifier.dim,):
        raise DimMismatch(f"embedding shape {z_img.shape}, classifier dim {classifier.dim}")
    return score_classes_batch(z_img[None, :], classifier)[0]


def score_classes_batch(z_imgs: np.ndarray, classifier: ClassifierMatrix) -> np.ndarray:
    """Row-wise class scores for a batch of normalized image embeddings."""
    z_imgs = np.asarray(z_imgs)
    if z_imgs.ndim != 2 or z_imgs.shape[1] != classifier.dim:
        raise DimMismatch(f"batch shape {z_imgs.shape}, classifier dim {classifier.dim}")
    sims = z_imgs @ classifier.rows.T
    scores = np.empty((z_imgs.shape[0], len(classifier.classes)), dtype=sims.dtype)
    for ci, (a, b) in enumerate(classifier.class_slices):
        scores[:, ci] = sims[:, a:b].mean(axis=1)
    return scores


def predict(scores: np.ndarray) -> np.ndarray:
    """Argmax with lowest-index tie-break (bare argmax semantics)."""
    return np.argmax(np.atleast_2d(scores), axis=1)


def load_template_file(path: str | Path) -> list[str]:
    """One template per line; blank lines ignored."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def load_rep_dir(path: str | Path, kind: RepKind) -> ClassRepresentationSet:
    """One UTF-8 file per class named `<class_id>.txt`.

    Description files hold one text per line; article files hold prose that
    is split into sentences here.
    """
    path = Path(path)
    classes = sorted(p.stem for p in path.glob("*.txt"))
    if not classes:
        raise EmptyInput(f"no class files under {path}")
    texts: dict[str, list[str]] = {}
    for c in classes:
        content = (path / f"{c}.txt").read_text(encoding="utf-8")
        if kind is RepKind.ARTICLE_SENTENCES:
            texts[c] = split_sentences(content)
        else:
            texts[c] = [line.strip() for line in content.splitlines() if line.strip()]
    return ClassRepresentationSet(classes, texts, kind)
