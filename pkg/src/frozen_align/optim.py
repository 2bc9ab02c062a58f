"""Adam with decoupled weight decay and global-norm gradient clipping.

Decay is applied as params <- params - lr * wd * params before the Adam
delta, and only to weight matrices (biases and BatchNorm affine params are
exempt). Clipping happens over all trainable tensors jointly, after backprop
and before the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import NonFiniteGradient, ShapeMismatch


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4

    def to_dict(self) -> dict[str, Any]:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "weight_decay": self.weight_decay}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AdamConfig":
        return cls(**d)


@dataclass
class AdamState:
    config: AdamConfig
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: dict[str, np.ndarray], config: AdamConfig) -> "AdamState":
        return cls(
            config=config,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def clip_global_norm(
    grads: dict[str, np.ndarray], max_norm: float
) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients jointly so their combined L2 norm is <= max_norm.

    Returns (grads, pre_clip_norm); grads are unchanged when already inside
    the ball.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be > 0, got {max_norm}")
    sq = 0.0
    for name, g in grads.items():
        s = float(np.sum(np.square(g, dtype=np.float64)))
        if not math.isfinite(s):
            raise NonFiniteGradient(f"gradient {name!r} contains NaN or Inf")
        sq += s
    norm = math.sqrt(sq)
    if norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * g.dtype.type(scale) for k, g in grads.items()}
    return grads, norm


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    decay_exempt: set[str] | None = None,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, in place on the parameter arrays."""
    cfg = state.config
    decay_exempt = decay_exempt or set()
    if set(grads) != set(params):
        raise ShapeMismatch("gradient names do not match parameter names")
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ShapeMismatch(
                f"{name}: grad shape {g.shape} != param shape {params[name].shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"gradient {name!r} contains NaN or Inf")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if cfg.weight_decay and name not in decay_exempt:
            p -= (cfg.lr * cfg.weight_decay) * p
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        m_hat = m / bias1
        v_hat = v / bias2
        p -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return params, state
