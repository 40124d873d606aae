from __future__ import annotations

import math

import numpy as np
import pytest

from circuitforge.engine.kernels import (
    concat_channels,
    concat_channels_backward,
    conv2d,
    conv2d_backward,
    dense,
    dense_backward,
    global_avg_pool,
    global_avg_pool_backward,
    maxpool,
    maxpool_backward,
    relu,
    relu_backward,
    softmax_probs,
    softmax_xent,
)
from circuitforge.errors import LabelOutOfRange, ShapeMismatch


def naive_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int) -> np.ndarray:
    n, cin, h, wdt = x.shape
    cout, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = h + 2 * pad - k + 1, wdt + 2 * pad - k + 1
    out = np.zeros((n, cout, ho, wo), dtype=x.dtype)
    for ni in range(n):
        for co in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(cin):
                        for di in range(k):
                            for dj in range(k):
                                acc += xp[ni, ci, i + di, j + dj] * w[co, ci, di, dj]
                    out[ni, co, i, j] = acc + b[co]
    return out


def test_conv_forward_matches_naive_oracle():
    rng = np.random.default_rng(0)
    for case in range(12):
        n = int(rng.integers(1, 3))
        cin = int(rng.integers(1, 4))
        cout = int(rng.integers(1, 4))
        k = int(rng.choice([1, 3, 5]))
        pad = int(rng.integers(0, 2))
        side = int(rng.integers(k, k + 4))
        x = rng.normal(size=(n, cin, side, side))
        w = rng.normal(size=(cout, cin, k, k))
        b = rng.normal(size=cout)
        got = conv2d(x, w, b, pad)
        want = naive_conv(x, w, b, pad)
        assert np.max(np.abs(got - want)) <= 1e-6 * max(1.0, np.max(np.abs(want))), case


def central_diff(f, arr: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f()
        flat[i] = keep - eps
        lo = f()
        flat[i] = keep
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b)) / scale)


def test_conv_backward_finite_difference():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    proj = rng.normal(size=conv2d(x, w, b, 1).shape)
    loss = lambda: float(np.sum(conv2d(x, w, b, 1) * proj))
    gx, gw, gb = conv2d_backward(proj, x, w, 1)
    assert rel_err(gx, central_diff(loss, x)) <= 1e-4
    assert rel_err(gw, central_diff(loss, w)) <= 1e-4
    assert rel_err(gb, central_diff(loss, b)) <= 1e-4


def test_maxpool_forward_and_floor_semantics():
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    out = maxpool(x, 2)
    assert out.shape == (1, 1, 2, 2)
    assert out[0, 0].tolist() == [[5, 7], [13, 15]]
    # odd trailing row/column is dropped
    odd = np.arange(9, dtype=np.float64).reshape(1, 1, 3, 3)
    assert maxpool(odd, 2).shape == (1, 1, 1, 1)
    assert maxpool(odd, 2)[0, 0, 0, 0] == 4.0


def test_maxpool_backward_routes_to_first_max_on_ties():
    x = np.ones((1, 1, 2, 2))
    gy = np.array([[[[5.0]]]])
    gx = maxpool_backward(gy, x, 2)
    assert gx[0, 0, 0, 0] == 5.0
    assert np.sum(gx) == 5.0 and np.count_nonzero(gx) == 1


def test_maxpool_backward_finite_difference():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 2, 6, 6))  # distinct values, ties improbable
    proj = rng.normal(size=(2, 2, 3, 3))
    loss = lambda: float(np.sum(maxpool(x, 2) * proj))
    gx = maxpool_backward(proj, x, 2)
    assert rel_err(gx, central_diff(loss, x)) <= 1e-4


def test_relu_and_backward():
    x = np.array([-2.0, -0.5, 0.5, 3.0])
    assert relu(x).tolist() == [0.0, 0.0, 0.5, 3.0]
    gy = np.ones_like(x)
    assert relu_backward(gy, x).tolist() == [0.0, 0.0, 1.0, 1.0]


def test_concat_and_backward_split():
    a = np.ones((2, 3, 4, 4))
    b = 2 * np.ones((2, 2, 4, 4))
    cat = concat_channels([a, b])
    assert cat.shape == (2, 5, 4, 4)
    ga, gb = concat_channels_backward(np.ones_like(cat), [3, 2])
    assert ga.shape == a.shape and gb.shape == b.shape


def test_global_avg_pool_and_backward():
    x = np.arange(8, dtype=np.float64).reshape(1, 2, 2, 2)
    out = global_avg_pool(x)
    assert out.shape == (1, 2, 1, 1)
    assert out[0, 0, 0, 0] == pytest.approx(1.5)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 3, 4, 4))
    proj = rng.normal(size=(2, 3, 1, 1))
    loss = lambda: float(np.sum(global_avg_pool(x) * proj))
    gx = global_avg_pool_backward(proj, x.shape)
    assert rel_err(gx, central_diff(loss, x)) <= 1e-4


def test_dense_finite_difference():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 5))
    w = rng.normal(size=(5, 4))
    b = rng.normal(size=4)
    proj = rng.normal(size=(3, 4))
    loss = lambda: float(np.sum(dense(x, w, b) * proj))
    gx, gw, gb = dense_backward(proj, x, w)
    assert rel_err(gx, central_diff(loss, x)) <= 1e-4
    assert rel_err(gw, central_diff(loss, w)) <= 1e-4
    assert rel_err(gb, central_diff(loss, b)) <= 1e-4


def test_uniform_logits_loss_is_ln_k():
    for k in (2, 5, 10, 100):
        logits = np.zeros((4, k))
        labels = np.arange(4) % k
        loss, _ = softmax_xent(logits, labels)
        assert abs(loss - math.log(k)) <= 1e-9


def test_softmax_xent_gradient_finite_difference():
    rng = np.random.default_rng(5)
    logits = rng.normal(size=(4, 6))
    labels = rng.integers(0, 6, size=4)
    _, grad = softmax_xent(logits, labels)
    num = central_diff(lambda: softmax_xent(logits, labels)[0], logits)
    assert rel_err(grad, num) <= 1e-4
    # per-row gradient sums to zero (softmax shift invariance)
    assert np.max(np.abs(grad.sum(axis=1))) <= 1e-12


def test_softmax_xent_is_shift_invariant_and_overflow_safe():
    logits = np.array([[1000.0, 1001.0, 999.0]])
    labels = np.array([1])
    loss, grad = softmax_xent(logits, labels)
    small, sgrad = softmax_xent(logits - 1000.0, labels)
    assert loss == pytest.approx(small, rel=1e-12)
    assert np.allclose(grad, sgrad)
    assert np.isfinite(loss)


def test_softmax_probs_rows_sum_to_one():
    rng = np.random.default_rng(6)
    p = softmax_probs(rng.normal(size=(5, 7)))
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.all(p > 0)


def test_softmax_xent_validates_inputs():
    with pytest.raises(LabelOutOfRange):
        softmax_xent(np.zeros((2, 3)), np.array([0, 3]))
    with pytest.raises(ShapeMismatch):
        softmax_xent(np.zeros((2, 3)), np.array([0]))
    with pytest.raises(ShapeMismatch):
        softmax_xent(np.zeros(3), np.array([0]))
