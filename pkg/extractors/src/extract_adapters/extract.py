"""Extraction drivers: run a frozen backend over a manifest and emit a store.

Features are written unnormalized; all normalization lives in the consumer.
A `<store>.meta.json` sidecar records the model, pooling, and (for images)
the exact preprocessing, so extractions are reproducible.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import EmptyCaption, PoolingUnsupported
from .manifest import ExtractionManifest
from .storefmt import write_store
from .textmodel import resolve_text_backend
from .visionmodel import resolve_vision_backend


def _batched(entries, size):
    for start in range(0, len(entries), size):
        yield entries[start:start + size]


def _write_sidecar(store_path: Path, meta: dict) -> None:
    with open(store_path.with_suffix(store_path.suffix + ".meta.json"), "w",
              encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def extract_text_features(manifest: ExtractionManifest) -> Path:
    """Embed each caption as a pooled last-layer hidden state."""
    backend = resolve_text_backend(manifest.model, manifest.device)
    if manifest.pooling not in backend.supported_poolings:
        raise PoolingUnsupported(
            f"{manifest.pooling.value} is not valid for decoder text models "
            f"(supported: {[p.value for p in backend.supported_poolings]})"
        )
    for rid, text in manifest.entries:
        if not text.strip():
            raise EmptyCaption(f"caption {rid!r} is empty")

    def records():
        for batch in _batched(manifest.entries, manifest.batch_size):
            pooled = backend.pooled([t for _, t in batch], manifest.pooling)
            vectors = pooled.cpu().numpy().astype(np.float32)
            yield from zip((rid for rid, _ in batch), vectors)

    count = write_store(records(), backend.hidden_size, "text", manifest.output)
    _write_sidecar(manifest.output, {
        "modality": "text", "model": manifest.model,
        "pooling": manifest.pooling.value, "padding_side": "right",
        "dim": backend.hidden_size, "count": count,
    })
    return manifest.output


def extract_vision_features(manifest: ExtractionManifest) -> Path:
    """Embed each image as one pooled global feature."""
    backend = resolve_vision_backend(manifest.model, manifest.device)
    if manifest.pooling not in backend.supported_poolings:
        raise PoolingUnsupported(
            f"{manifest.pooling.value} is not valid for vision models "
            f"(supported: {[p.value for p in backend.supported_poolings]})"
        )

    def records():
        for batch in _batched(manifest.entries, manifest.batch_size):
            pooled = backend.pooled([p for _, p in batch], manifest.pooling)
            vectors = pooled.cpu().numpy().astype(np.float32)
            yield from zip((rid for rid, _ in batch), vectors)

    count = write_store(records(), backend.hidden_size, "vision", manifest.output)
    _write_sidecar(manifest.output, {
        "modality": "vision", "model": manifest.model,
        "pooling": manifest.pooling.value,
        "preprocessing": backend.preprocess_metadata(),
        "dim": backend.hidden_size, "count": count,
    })
    return manifest.output
