"""Vision-backbone backend: one pooled global feature per image.

Preprocessing is deterministic (RGB convert, bilinear resize to the model's
square input, scale to [0,1], per-channel normalize) and its parameters are
recorded alongside the output store.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .errors import ImageDecodeFailure, ModelLoadFailure
from .manifest import Pooling
from .pooling import pool_hidden_states

TINY_VIT = "tiny-test-vit"
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)


class VitVisionBackend:
    supported_poolings = (Pooling.CLS_TOKEN, Pooling.MEAN_TOKEN)

    def __init__(self, model, image_size: int, mean=DEFAULT_MEAN, std=DEFAULT_STD,
                 device: str = "cpu"):
        self.model = model.eval().to(device)
        self.image_size = int(image_size)
        self.mean = np.asarray(mean, dtype=np.float32)
        self.std = np.asarray(std, dtype=np.float32)
        self.device = device

    @classmethod
    def from_pretrained(cls, model_id: str, device: str = "cpu") -> "VitVisionBackend":
        try:
            from transformers import AutoModel

            model = AutoModel.from_pretrained(model_id, torch_dtype=torch.float32)
            size = int(model.config.image_size)
        except Exception as exc:
            raise ModelLoadFailure(f"cannot load vision model {model_id!r}: {exc}") from exc
        return cls(model, size, device=device)

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    def preprocess_metadata(self) -> dict:
        return {
            "convert": "RGB",
            "resize": [self.image_size, self.image_size],
            "interpolation": "bilinear",
            "scale": "1/255",
            "normalize_mean": self.mean.tolist(),
            "normalize_std": self.std.tolist(),
        }

    def preprocess(self, path: str | Path) -> np.ndarray:
        from PIL import Image

        try:
            with Image.open(path) as img:
                img = img.convert("RGB").resize(
                    (self.image_size, self.image_size), Image.BILINEAR
                )
                arr = np.asarray(img, dtype=np.float32) / 255.0
        except (OSError, ValueError) as exc:
            raise ImageDecodeFailure(f"cannot decode image {path}: {exc}") from exc
        arr = (arr - self.mean) / self.std
        return arr.transpose(2, 0, 1)  # HWC -> CHW

    @torch.no_grad()
    def pooled(self, paths: list[str | Path], pooling: Pooling) -> torch.Tensor:
        pixels = torch.from_numpy(np.stack([self.preprocess(p) for p in paths]))
        out = self.model(pixel_values=pixels.to(self.device))
        hidden = out.last_hidden_state  # (B, 1 + patches, H); token 0 is CLS
        mask = torch.ones(hidden.shape[:2], dtype=torch.long, device=hidden.device)
        return pool_hidden_states(hidden, mask, pooling)


def build_tiny_vit(seed: int = 0, hidden: int = 24, layers: int = 2, heads: int = 2,
                   image_size: int = 32, patch: int = 8,
                   device: str = "cpu") -> VitVisionBackend:
    """Self-contained vision transformer (seeded random weights) for offline
    runs and format/determinism tests."""
    from transformers import ViTConfig, ViTModel

    torch.manual_seed(seed)
    config = ViTConfig(
        hidden_size=hidden, num_hidden_layers=layers, num_attention_heads=heads,
        intermediate_size=2 * hidden, image_size=image_size, patch_size=patch,
        num_channels=3,
    )
    return VitVisionBackend(ViTModel(config), image_size, device=device)


def resolve_vision_backend(model_id: str, device: str = "cpu") -> VitVisionBackend:
    if model_id == TINY_VIT:
        return build_tiny_vit(device=device)
    return VitVisionBackend.from_pretrained(model_id, device)
