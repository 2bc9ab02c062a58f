"""Token-pooling over per-token hidden states.

last_token must select the final *real* (non-padding) token; with right-side
padding and a causal model, real-token hidden states are unaffected by batch
padding, which the batching-invariance tests pin down (the classic extraction
bug is pooling a pad position or shifting positions via left padding).
"""

from __future__ import annotations

import torch

from .manifest import Pooling


def pool_hidden_states(
    hidden: torch.Tensor, attention_mask: torch.Tensor, pooling: Pooling
) -> torch.Tensor:
    """hidden: (B, L, H); attention_mask: (B, L) with 1 on real tokens."""
    if pooling is Pooling.CLS_TOKEN:
        return hidden[:, 0, :]
    if pooling is Pooling.LAST_TOKEN:
        last = attention_mask.sum(dim=1).long() - 1  # index of last real token
        return hidden[torch.arange(hidden.shape[0]), last, :]
    if pooling is Pooling.MEAN_TOKEN:
        mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
        return (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
    raise ValueError(f"unknown pooling {pooling}")
