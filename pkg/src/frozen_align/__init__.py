"""Training and evaluation engine for aligning frozen vision and language
embeddings with a small trainable text projection."""

from .contrastive import EmbeddingBatch, LossOutput, infonce_loss, normalize, normalize_backward
from .optim import AdamConfig, AdamState, adam_step, clip_global_norm
from .projection import ProjectionConfig, ProjectionNet, param_count
from .store import (
    FeatureRecord,
    FeatureStoreHeader,
    Modality,
    PairedDataset,
    StoreHandle,
    build_pairs,
    open_store,
    write_store,
)
from .trainer import TrainConfig, TrainReport, sample_batch, split_train_val, train

__all__ = [
    "AdamConfig", "AdamState", "EmbeddingBatch", "FeatureRecord", "FeatureStoreHeader",
    "LossOutput", "Modality", "PairedDataset", "ProjectionConfig", "ProjectionNet",
    "StoreHandle", "TrainConfig", "TrainReport", "adam_step", "build_pairs",
    "clip_global_norm", "infonce_loss", "normalize", "normalize_backward", "open_store",
    "param_count", "sample_batch", "split_train_val", "train", "write_store",
]

__version__ = "0.1.0"
