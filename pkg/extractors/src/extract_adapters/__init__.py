"""Adapters that run frozen pretrained vision and language models and export
their features in the shared binary store format."""

from .extract import extract_text_features, extract_vision_features
from .manifest import ExtractionManifest, Pooling, load_entries
from .storefmt import read_store, write_store

__all__ = [
    "ExtractionManifest", "Pooling", "extract_text_features",
    "extract_vision_features", "load_entries", "read_store", "write_store",
]

__version__ = "0.1.0"
