"""L2 normalization, cosine similarities, and the symmetric contrastive loss.

Embeddings are normalized after projection, so cosine similarity is a plain
dot product. The loss is a softmax cross-entropy over similarity rows scaled
by 1/tau, taken in both pairing directions (text-queries-images and
image-queries-texts) and averaged: mean over batch items, mean over the two
directions. Gradients with respect to both normalized batches are analytic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidTau, NotNormalized, ShapeMismatch, ZeroVector

_MIN_NORM = 1e-12


@dataclass
class EmbeddingBatch:
    data: np.ndarray  # B x d
    normalized: bool = False


@dataclass
class LossOutput:
    total_loss: float
    loss_t2i: float
    loss_i2t: float
    grad_z_img: np.ndarray
    grad_z_txt: np.ndarray


def normalize(batch: np.ndarray | EmbeddingBatch) -> EmbeddingBatch:
    """Divide each row by its L2 norm."""
    data = batch.data if isinstance(batch, EmbeddingBatch) else np.asarray(batch)
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    if np.any(norms < _MIN_NORM):
        bad = int(np.argmin(norms))
        raise ZeroVector(f"row {bad} has norm {float(norms[bad, 0]):.3e} < {_MIN_NORM}")
    return EmbeddingBatch(data / norms, normalized=True)


def _check_normalized(batch: EmbeddingBatch, name: str) -> np.ndarray:
    if not isinstance(batch, EmbeddingBatch) or not batch.normalized:
        raise NotNormalized(f"{name} is not a normalized EmbeddingBatch")
    return batch.data


def similarity_matrix(z_a: EmbeddingBatch, z_b: EmbeddingBatch) -> np.ndarray:
    """Entry (i, j) = <z_a_i, z_b_j>."""
    a = _check_normalized(z_a, "z_a")
    b = _check_normalized(z_b, "z_b")
    if a.shape != b.shape:
        raise ShapeMismatch(f"batch shapes differ: {a.shape} vs {b.shape}")
    return a @ b.T


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    # per-row max subtraction: 1/tau scales similarities by ~14x, enough to
    # overflow 32-bit exponentials without the guard
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_xent_rows(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cross-entropy of each row's softmax against the diagonal target.

    Returns per-item losses and dlogits = softmax - onehot(diagonal); each
    dlogits row sums to zero (partition-function identity).
    """
    log_p = _log_softmax(logits)
    diag = np.arange(logits.shape[0])
    losses = -log_p[diag, diag]
    dlogits = np.exp(log_p)
    dlogits[diag, diag] -= 1.0
    return losses, dlogits


def infonce_loss(z_img: EmbeddingBatch, z_txt: EmbeddingBatch, tau: float) -> LossOutput:
    """Symmetric contrastive loss over a batch of matched pairs.

    Row i of the similarity matrix S = z_txt @ z_img.T holds text i against
    all images; the text-to-image term is the cross-entropy of row softmax
    (S/tau) against the diagonal, and the image-to-text term mirrors it on
    S.T. Reduction is mean over items, mean over the two directions.
    Gradients flow to both embedding batches.
    """
    if not np.isfinite(tau) or tau <= 0:
        raise InvalidTau(f"tau must be a positive finite scalar, got {tau}")
    vi = _check_normalized(z_img, "z_img")
    tx = _check_normalized(z_txt, "z_txt")
    if vi.shape != tx.shape:
        raise ShapeMismatch(f"batch shapes differ: {vi.shape} vs {tx.shape}")
    batch = vi.shape[0]
    sims = tx @ vi.T  # S[i, j] = <text_i, image_j>
    logits = sims / tau

    losses_t2i, dlogits_t2i = softmax_xent_rows(logits)      # texts query images
    losses_i2t, dlogits_i2t = softmax_xent_rows(logits.T)    # images query texts
    loss_t2i = float(losses_t2i.mean())
    loss_i2t = float(losses_i2t.mean())
    total = 0.5 * (loss_t2i + loss_i2t)

    # d(total)/dS, combining both directions' terms
    d_sims = (dlogits_t2i + dlogits_i2t.T) / (2.0 * batch * tau)
    grad_z_txt = d_sims @ vi
    grad_z_img = d_sims.T @ tx
    return LossOutput(total, loss_t2i, loss_i2t, grad_z_img, grad_z_txt)


def normalize_backward(grad_normalized: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Chain rule through row-wise L2 normalization.

    For each row with unit direction zhat: g_raw = (g - <g, zhat> zhat) / |raw|.
    """
    grad_normalized = np.asarray(grad_normalized)
    raw = np.asarray(raw)
    if grad_normalized.shape != raw.shape:
        raise ShapeMismatch(
            f"gradient shape {grad_normalized.shape} != raw shape {raw.shape}"
        )
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    if np.any(norms < _MIN_NORM):
        raise ZeroVector("cannot backpropagate through a zero-norm row")
    zhat = raw / norms
    radial = (grad_normalized * zhat).sum(axis=1, keepdims=True)
    return (grad_normalized - radial * zhat) / norms
