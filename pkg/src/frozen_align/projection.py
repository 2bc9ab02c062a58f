"""Trainable text projection: an MLP with manual forward and backward passes.

Hidden blocks are Linear -> BatchNorm -> ReLU -> Dropout; the final layer is
a plain Linear so the embedding is unconstrained before L2 normalization.
The vision side of the model is the identity and lives in `contrastive`.

Layer primitives (linear/batchnorm/relu/dropout) are module-level functions
so each can be gradient-checked in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import BatchTooSmall, InvalidConfig, StaleCache, WidthMismatch

_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class ProjectionConfig:
    input_dim: int
    hidden_dim: int = 4096
    output_dim: int = 768
    num_layers: int = 4
    dropout_p: float = 0.2
    seed: int = 0
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    dtype: str = "float32"

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1:
            raise InvalidConfig("all widths must be >= 1")
        if self.num_layers < 2:
            raise InvalidConfig("num_layers must be >= 2 (one hidden + one output layer)")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidConfig(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.dtype not in _DTYPES:
            raise InvalidConfig(f"dtype must be one of {sorted(_DTYPES)}")
        if self.bn_eps <= 0 or not 0 < self.bn_momentum <= 1:
            raise InvalidConfig("bn_eps must be > 0 and bn_momentum in (0, 1]")

    @property
    def widths(self) -> list[int]:
        """Per-layer widths: input, (num_layers - 1) hidden, output."""
        return [self.input_dim] + [self.hidden_dim] * (self.num_layers - 1) + [self.output_dim]

    @property
    def np_dtype(self):
        return _DTYPES[self.dtype]

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_dim": self.input_dim, "hidden_dim": self.hidden_dim,
            "output_dim": self.output_dim, "num_layers": self.num_layers,
            "dropout_p": self.dropout_p, "seed": self.seed,
            "bn_eps": self.bn_eps, "bn_momentum": self.bn_momentum, "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ProjectionConfig":
        return cls(**d)


def param_count(config: ProjectionConfig) -> int:
    """Exact number of trainable scalars (weights, biases, gamma, beta)."""
    widths = config.widths
    total = 0
    for i in range(config.num_layers):
        total += widths[i] * widths[i + 1] + widths[i + 1]
        if i < config.num_layers - 1:  # BatchNorm after every non-final layer
            total += 2 * widths[i + 1]
    return total


# --- layer primitives ---

def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, x


def linear_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    dw = x.T @ dy
    db = dy.sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float):
    """Train-mode BatchNorm using batch statistics (biased variance)."""
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    y = gamma * xhat + beta
    return y, (xhat, inv_std, mean, var)


def batchnorm_eval(x, gamma, beta, running_mean, running_var, eps):
    xhat = (x - running_mean) / np.sqrt(running_var + eps)
    return gamma * xhat + beta


def batchnorm_backward(cache, gamma: np.ndarray, dy: np.ndarray):
    """Standard batch-statistics derivative (mean and var depend on x)."""
    xhat, inv_std, _, _ = cache
    batch = dy.shape[0]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dx = (inv_std / batch) * (
        batch * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
    )
    return dx, dgamma, dbeta


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0.0), x > 0


def relu_backward(mask: np.ndarray, dy: np.ndarray):
    return dy * mask


def dropout_forward(x: np.ndarray, p: float, rng: np.random.Generator):
    """Inverted-scaling dropout; p = 0 is the identity and draws no numbers."""
    if p == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= p).astype(x.dtype)
    return x * mask / (1.0 - p), mask


def dropout_backward(mask, p: float, dy: np.ndarray):
    if mask is None:
        return dy
    return dy * mask / (1.0 - p)


# --- the network ---

@dataclass
class LayerCache:
    """Bookkeeping for one train-mode forward pass."""
    net_token: int
    batch: int
    block_caches: list  # per hidden block: (x_in, bn_cache, relu_mask, drop_mask)
    final_x: np.ndarray


class ProjectionNet:
    """Parameter container plus forward/backward; mutates running stats in
    train mode, so forward/backward on one instance are exclusive."""

    def __init__(self, config: ProjectionConfig):
        self.config = config
        dt = config.np_dtype
        widths = config.widths
        init_rng, drop_rng = [
            np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(2)
        ]
        self.rng = drop_rng
        self.params: dict[str, np.ndarray] = {}
        self.running: dict[str, np.ndarray] = {}
        for i in range(config.num_layers):
            fan_in, fan_out = widths[i], widths[i + 1]
            scale = np.sqrt(2.0 / fan_in)  # fan-in scaling suited to ReLU stacks
            self.params[f"w{i}"] = (init_rng.standard_normal((fan_in, fan_out)) * scale).astype(dt)
            self.params[f"b{i}"] = np.zeros(fan_out, dtype=dt)
            if i < config.num_layers - 1:
                self.params[f"gamma{i}"] = np.ones(fan_out, dtype=dt)
                self.params[f"beta{i}"] = np.zeros(fan_out, dtype=dt)
                self.running[f"mean{i}"] = np.zeros(fan_out, dtype=dt)
                self.running[f"var{i}"] = np.ones(fan_out, dtype=dt)

    @property
    def num_layers(self) -> int:
        return self.config.num_layers

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def decay_exempt_names(self) -> set[str]:
        """Biases and BatchNorm affine params are excluded from weight decay."""
        return {n for n in self.params if not n.startswith("w")}

    def forward(self, batch: np.ndarray, train: bool):
        """Returns (output, cache); cache is None in eval mode.

        Train mode uses batch statistics, fresh dropout masks with inverted
        scaling, and updates running stats. Eval mode is a pure function of
        (parameters, running stats, input).
        """
        cfg = self.config
        x = np.asarray(batch, dtype=cfg.np_dtype)
        if x.ndim != 2 or x.shape[1] != cfg.input_dim:
            raise WidthMismatch(f"batch shape {x.shape}, expected (B, {cfg.input_dim})")
        if train and x.shape[0] < 2:
            raise BatchTooSmall("train-mode forward needs B >= 2 for batch statistics")
        block_caches = []
        for i in range(cfg.num_layers - 1):
            z, x_in = linear_forward(x, self.params[f"w{i}"], self.params[f"b{i}"])
            gamma, beta = self.params[f"gamma{i}"], self.params[f"beta{i}"]
            if train:
                y, bn_cache = batchnorm_forward(z, gamma, beta, cfg.bn_eps)
                _, _, mean, var = bn_cache
                m = cfg.bn_momentum
                self.running[f"mean{i}"] = ((1 - m) * self.running[f"mean{i}"] + m * mean).astype(cfg.np_dtype)
                self.running[f"var{i}"] = ((1 - m) * self.running[f"var{i}"] + m * var).astype(cfg.np_dtype)
            else:
                y = batchnorm_eval(z, gamma, beta,
                                   self.running[f"mean{i}"], self.running[f"var{i}"], cfg.bn_eps)
            a, relu_mask = relu_forward(y)
            if train:
                x, drop_mask = dropout_forward(a, cfg.dropout_p, self.rng)
                block_caches.append((x_in, bn_cache, relu_mask, drop_mask))
            else:
                x = a
        last = cfg.num_layers - 1
        out, final_x = linear_forward(x, self.params[f"w{last}"], self.params[f"b{last}"])
        if not train:
            return out, None
        return out, LayerCache(id(self), x.shape[0], block_caches, final_x)

    def backward(self, cache: LayerCache, upstream: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss for every weight, bias, gamma, beta."""
        cfg = self.config
        if not isinstance(cache, LayerCache) or cache.net_token != id(self):
            raise StaleCache("cache does not belong to this net")
        upstream = np.asarray(upstream, dtype=cfg.np_dtype)
        if upstream.shape != (cache.batch, cfg.output_dim):
            raise StaleCache(
                f"upstream shape {upstream.shape}, expected ({cache.batch}, {cfg.output_dim})"
            )
        grads: dict[str, np.ndarray] = {}
        last = cfg.num_layers - 1
        dx, grads[f"w{last}"], grads[f"b{last}"] = linear_backward(
            cache.final_x, self.params[f"w{last}"], upstream
        )
        for i in range(cfg.num_layers - 2, -1, -1):
            x_in, bn_cache, relu_mask, drop_mask = cache.block_caches[i]
            dx = dropout_backward(drop_mask, cfg.dropout_p, dx)
            dx = relu_backward(relu_mask, dx)
            dx, grads[f"gamma{i}"], grads[f"beta{i}"] = batchnorm_backward(
                bn_cache, self.params[f"gamma{i}"], dx
            )
            dx, grads[f"w{i}"], grads[f"b{i}"] = linear_backward(x_in, self.params[f"w{i}"], dx)
        return grads


def init(config: ProjectionConfig) -> ProjectionNet:
    return ProjectionNet(config)
