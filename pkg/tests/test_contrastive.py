import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frozen_align.contrastive import (
    EmbeddingBatch,
    infonce_loss,
    normalize,
    normalize_backward,
    similarity_matrix,
    softmax_xent_rows,
)
from frozen_align.errors import InvalidTau, NotNormalized, ShapeMismatch, ZeroVector


def unit_rows(rng, b, d):
    return normalize(rng.standard_normal((b, d)))


def brute_force_loss(vi, tx, tau):
    """Term-by-term enumeration of the per-item, per-direction loss at 64-bit."""
    vi = np.asarray(vi, dtype=np.float64)
    tx = np.asarray(tx, dtype=np.float64)
    b = vi.shape[0]
    totals = []
    for m, n in ((tx, vi), (vi, tx)):  # (txt, img) then (img, txt)
        per_item = []
        for i in range(b):
            num = math.exp(float(m[i] @ n[i]) / tau)
            den = sum(math.exp(float(m[i] @ n[j]) / tau) for j in range(b))
            per_item.append(-math.log(num / den))
        totals.append(sum(per_item) / b)
    return totals[0], totals[1], 0.5 * (totals[0] + totals[1])


# --- normalize ---

def test_normalize_345_triangle():
    out = normalize(np.array([[3.0, 4.0]]))
    assert out.normalized
    assert np.allclose(out.data, [[0.6, 0.8]])


def test_normalize_idempotent(rng):
    once = unit_rows(rng, 5, 7)
    twice = normalize(once.data)
    assert np.max(np.abs(twice.data - once.data)) < 1e-7


def test_normalize_zero_row_rejected():
    with pytest.raises(ZeroVector):
        normalize(np.array([[1.0, 0.0], [0.0, 0.0]]))


# --- similarity ---

def test_similarity_identical_batches_diagonal_one(rng):
    z = unit_rows(rng, 6, 9)
    sims = similarity_matrix(z, z)
    assert np.all(np.abs(np.diag(sims) - 1.0) < 1e-5)


def test_similarity_orthogonal_rows():
    a = normalize(np.array([[1.0, 0.0], [0.0, 1.0]]))
    sims = similarity_matrix(a, a)
    assert abs(sims[0, 1]) < 1e-6 and abs(sims[1, 0]) < 1e-6


def test_similarity_matches_scalar_loop(rng):
    a = unit_rows(rng, 4, 8)
    b = unit_rows(rng, 4, 8)
    sims = similarity_matrix(a, b)
    for i in range(4):
        for j in range(4):
            dot = sum(float(a.data[i, k]) * float(b.data[j, k]) for k in range(8))
            assert abs(sims[i, j] - dot) < 1e-5


def test_similarity_requires_normalized(rng):
    raw = EmbeddingBatch(rng.standard_normal((3, 4)), normalized=False)
    with pytest.raises(NotNormalized):
        similarity_matrix(raw, raw)


def test_similarity_shape_mismatch(rng):
    with pytest.raises(ShapeMismatch):
        similarity_matrix(unit_rows(rng, 3, 4), unit_rows(rng, 4, 4))


# --- the loss ---

def test_loss_single_pair_is_zero(rng):
    z = unit_rows(rng, 1, 6)
    out = infonce_loss(z, z, 0.07)
    assert abs(out.total_loss) < 1e-12


def test_loss_uniform_similarities_is_log_n(rng):
    row = normalize(rng.standard_normal((1, 8))).data
    z = EmbeddingBatch(np.repeat(row, 5, axis=0), normalized=True)
    out = infonce_loss(z, z, 0.07)
    assert out.total_loss == pytest.approx(math.log(5), abs=1e-9)


def test_loss_matches_brute_force_oracle(rng):
    vi = unit_rows(rng, 3, 6)
    tx = unit_rows(rng, 3, 6)
    out = infonce_loss(vi, tx, 0.07)
    t2i, i2t, total = brute_force_loss(vi.data, tx.data, 0.07)
    assert out.loss_t2i == pytest.approx(t2i, abs=1e-5)
    assert out.loss_i2t == pytest.approx(i2t, abs=1e-5)
    assert out.total_loss == pytest.approx(total, abs=1e-5)


def test_loss_gradients_match_finite_differences(rng):
    vi = unit_rows(rng, 3, 5).data
    tx = unit_rows(rng, 3, 5).data
    out = infonce_loss(EmbeddingBatch(vi, True), EmbeddingBatch(tx, True), 0.07)
    h = 1e-6
    for target, grad in ((vi, out.grad_z_img), (tx, out.grad_z_txt)):
        num = np.zeros_like(target)
        for i in range(target.shape[0]):
            for j in range(target.shape[1]):
                orig = target[i, j]
                target[i, j] = orig + h
                _, _, up = brute_force_loss(vi, tx, 0.07)
                target[i, j] = orig - h
                _, _, dn = brute_force_loss(vi, tx, 0.07)
                target[i, j] = orig
                num[i, j] = (up - dn) / (2 * h)
        assert np.max(np.abs(num - grad)) < 1e-5


def test_loss_symmetry(rng):
    a = unit_rows(rng, 4, 6)
    b = unit_rows(rng, 4, 6)
    assert infonce_loss(a, b, 0.07).loss_t2i == pytest.approx(
        infonce_loss(b, a, 0.07).loss_i2t, abs=1e-12
    )


@settings(deadline=None, max_examples=30)
@given(seed=st.integers(0, 2**31), b=st.integers(2, 12))
def test_loss_permutation_equivariance(seed, b):
    rng = np.random.default_rng(seed)
    vi = unit_rows(rng, b, 5)
    tx = unit_rows(rng, b, 5)
    base = infonce_loss(vi, tx, 0.07).total_loss
    perm = rng.permutation(b)
    permuted = infonce_loss(
        EmbeddingBatch(vi.data[perm], True), EmbeddingBatch(tx.data[perm], True), 0.07
    ).total_loss
    assert permuted == pytest.approx(base, rel=1e-9)


@settings(deadline=None, max_examples=30)
@given(seed=st.integers(0, 2**31), b=st.integers(2, 12))
def test_loss_strictly_positive_for_b_ge_2(seed, b):
    rng = np.random.default_rng(seed)
    out = infonce_loss(unit_rows(rng, b, 5), unit_rows(rng, b, 5), 0.07)
    assert out.total_loss > 0
    assert out.loss_t2i >= 0 and out.loss_i2t >= 0


def test_loss_finite_at_extreme_tau():
    # identical rows at tau = 1e-4: raw exponent would be 1e4 without the guard
    z = EmbeddingBatch(np.repeat(normalize(np.ones((1, 4))).data, 6, axis=0), True)
    out = infonce_loss(z, z, 1e-4)
    assert np.isfinite(out.total_loss)


def test_gradient_rows_sum_to_zero(rng):
    logits = rng.standard_normal((7, 7)) * 10
    _, dlogits = softmax_xent_rows(logits)
    assert np.all(np.abs(dlogits.sum(axis=1)) < 1e-6)


def test_invalid_tau(rng):
    z = unit_rows(rng, 2, 4)
    for tau in (0.0, -1.0, float("nan")):
        with pytest.raises(InvalidTau):
            infonce_loss(z, z, tau)


# --- normalization backward ---

def test_normalize_backward_annihilates_parallel_component(rng):
    raw = rng.standard_normal((3, 5))
    grad = 2.7 * raw  # parallel to each row
    out = normalize_backward(grad, raw)
    assert np.max(np.abs(out)) < 1e-12


def test_normalize_backward_orthogonal_closed_form():
    raw = np.array([[2.0, 0.0]])
    grad = np.array([[0.0, 3.0]])  # orthogonal to the row
    out = normalize_backward(grad, raw)
    assert np.allclose(out, [[0.0, 1.5]])


def test_normalize_backward_matches_finite_differences(rng):
    raw = rng.standard_normal((4, 6))
    r = rng.standard_normal((4, 6))

    def f():
        return float(np.sum(normalize(raw).data * r))

    ana = normalize_backward(r, raw)
    h = 1e-6
    num = np.zeros_like(raw)
    for i in range(raw.shape[0]):
        for j in range(raw.shape[1]):
            orig = raw[i, j]
            raw[i, j] = orig + h
            fp = f()
            raw[i, j] = orig - h
            fm = f()
            raw[i, j] = orig
            num[i, j] = (fp - fm) / (2 * h)
    denom = np.maximum(1.0, np.maximum(np.abs(num), np.abs(ana)))
    assert np.max(np.abs(num - ana) / denom) < 1e-4


def test_normalize_backward_zero_row_rejected():
    with pytest.raises(ZeroVector):
        normalize_backward(np.ones((1, 2)), np.zeros((1, 2)))
