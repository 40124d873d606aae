"""Forward and backward kernels on plain numpy arrays.

Activations are (batch, channels, height, width) throughout; dense
layers work on (batch, features).  Every backward function takes the
upstream gradient plus whatever the forward pass needs again, and
recomputes cheap intermediates instead of caching them.  All kernels
preserve the input dtype so the same code runs the float32 training
path and the float64 gradient-check path.
"""

from __future__ import annotations

import numpy as np

from ..errors import LabelOutOfRange, ShapeMismatch


def _patches(x: np.ndarray, k: int, pad: int) -> np.ndarray:
    """Stack all kxk windows: (N, C, k, k, Ho, Wo).  Stride is fixed at 1."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    n, c, h, w = x.shape
    ho, wo = h - k + 1, w - k + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"{k}x{k} kernel does not fit {h}x{w} input")
    out = np.empty((n, c, k, k, ho, wo), dtype=x.dtype)
    for di in range(k):
        for dj in range(k):
            out[:, :, di, dj] = x[:, :, di:di + ho, dj:dj + wo]
    return out


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int) -> np.ndarray:
    """x (N,Cin,H,W) * w (Cout,Cin,k,k) + b (Cout,) -> (N,Cout,Ho,Wo)."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv input {x.shape} vs kernel {w.shape}")
    cols = _patches(x, w.shape[2], pad)
    y = np.tensordot(cols, w, axes=([1, 2, 3], [1, 2, 3]))
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2)) + b[None, :, None, None]


def conv2d_backward(gy: np.ndarray, x: np.ndarray, w: np.ndarray, pad: int
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (gx, gw, gb) for conv2d."""
    k = w.shape[2]
    cols = _patches(x, k, pad)
    gb = gy.sum(axis=(0, 2, 3))
    # gy (N,Co,Ho,Wo) x cols (N,Ci,k,k,Ho,Wo) contracted over N,Ho,Wo
    gw = np.tensordot(gy, cols, axes=([0, 2, 3], [0, 4, 5]))
    # spread each output gradient back over its kxk window
    gcols = np.tensordot(w, gy, axes=([0], [1]))  # (Ci,k,k,N,Ho,Wo)
    n, _, h, wdt = x.shape
    ho, wo = gy.shape[2], gy.shape[3]
    gxp = np.zeros((n, x.shape[1], h + 2 * pad, wdt + 2 * pad), dtype=gy.dtype)
    for di in range(k):
        for dj in range(k):
            gxp[:, :, di:di + ho, dj:dj + wo] += gcols[:, di, dj].transpose(1, 0, 2, 3)
    gx = gxp[:, :, pad:pad + h, pad:pad + wdt] if pad else gxp
    return gx, gw.astype(gy.dtype, copy=False), gb


def maxpool(x: np.ndarray, p: int) -> np.ndarray:
    """Non-overlapping pxp max pooling; trailing rows/cols that do not
    fill a window are dropped (floor semantics)."""
    n, c, h, w = x.shape
    ho, wo = h // p, w // p
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"pool {p} does not fit {h}x{w} input")
    tiles = x[:, :, :ho * p, :wo * p].reshape(n, c, ho, p, wo, p)
    return tiles.max(axis=(3, 5))


def maxpool_backward(gy: np.ndarray, x: np.ndarray, p: int) -> np.ndarray:
    """Routes each gradient to the first maximum of its window, so ties
    break identically on every run."""
    n, c, h, w = x.shape
    ho, wo = h // p, w // p
    tiles = x[:, :, :ho * p, :wo * p].reshape(n, c, ho, p, wo, p)
    flat = tiles.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, p * p)
    winner = flat.argmax(axis=-1)  # argmax picks the first max
    gflat = np.zeros_like(flat)
    np.put_along_axis(gflat, winner[..., None], gy[..., None], axis=-1)
    gtiles = gflat.reshape(n, c, ho, wo, p, p).transpose(0, 1, 2, 4, 3, 5)
    gx = np.zeros_like(x)
    gx[:, :, :ho * p, :wo * p] = gtiles.reshape(n, c, ho * p, wo * p)
    return gx


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(gy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return gy * (x > 0)


def concat_channels(parts: list[np.ndarray]) -> np.ndarray:
    hw = {p.shape[2:] for p in parts}
    if len(hw) != 1:
        raise ShapeMismatch(f"cannot concat differing spatial sizes {sorted(hw)}")
    return np.concatenate(parts, axis=1)


def concat_channels_backward(gy: np.ndarray, channel_counts: list[int]) -> list[np.ndarray]:
    splits = np.cumsum(channel_counts)[:-1]
    return np.split(gy, splits, axis=1)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    return x.mean(axis=(2, 3), keepdims=True)


def global_avg_pool_backward(gy: np.ndarray, x_shape: tuple) -> np.ndarray:
    n, c, h, w = x_shape
    return np.broadcast_to(gy / (h * w), x_shape).astype(gy.dtype, copy=False).copy()


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x (N,F) @ w (F,O) + b (O,)."""
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"dense input {x.shape} vs weight {w.shape}")
    return x @ w + b


def dense_backward(gy: np.ndarray, x: np.ndarray, w: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return gy @ w.T, x.T @ gy, gy.sum(axis=0)


def softmax_xent(logits: np.ndarray, labels: np.ndarray
                 ) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    Softmax is computed with per-row max subtraction so large logits
    cannot overflow.
    """
    if logits.ndim != 2:
        raise ShapeMismatch(f"expected (batch, categories) logits, got {logits.shape}")
    n, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeMismatch(f"labels {labels.shape} do not match batch of {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = int(labels[(labels < 0) | (labels >= k)][0])
        raise LabelOutOfRange(f"label {bad} outside [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, np.finfo(logits.dtype).tiny)).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)
