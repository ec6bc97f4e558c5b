"""Layers with hand-derived forward and backward passes.

Every backward pass returns the gradient with respect to its input as well as
its parameters; FGSM needs the former all the way down to the pixels.

Shapes follow the usual conventions: dense activations are ``(batch, features)``
and image activations are ``(batch, channels, height, width)``. Convolutions are
3x3 cross-correlations with zero padding 1 and stride 1, lowered to a single
matrix product via im2col. The patch matrix is laid out channel-tap major,
``(c*9, b*h*w)``, so the long pixel axis is the product's inner loop.
"""

from typing import NamedTuple

import numba
import numpy as np

from .errors import DimensionError, LabelError
from .ndcore import as_tensor, matmul

# dense


def dense_forward(weights, bias, x):
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise DimensionError(
            f"dense layer expects (batch, {weights.shape[0]}), got {x.shape}"
        )
    return matmul(x, weights) + bias


def dense_backward(weights, x, grad_out):
    """Return ``(grad_weights, grad_bias, grad_x)`` for ``y = x W + b``."""
    x = as_tensor(x)
    grad_out = as_tensor(grad_out)
    if grad_out.shape != (x.shape[0], weights.shape[1]) or x.shape[1] != weights.shape[0]:
        raise DimensionError(
            f"dense backward: x {x.shape}, W {weights.shape}, grad {grad_out.shape}"
        )
    grad_w = matmul(np.ascontiguousarray(x.T), grad_out)
    grad_b = grad_out.sum(axis=0)
    grad_x = matmul(grad_out, np.ascontiguousarray(weights.T))
    return grad_w, grad_b, grad_x


# conv


@numba.njit(cache=True, nogil=True)
def _im2col_t(x, cols):
    # cols[(c*3 + di)*3 + dj, (n*h + i)*w + j] = x[n, c, i + di - 1, j + dj - 1], zero outside
    b, c, h, w = x.shape
    for ch in range(c):
        for di in range(3):
            for dj in range(3):
                q = (ch * 3 + di) * 3 + dj
                for n in range(b):
                    for i in range(h):
                        si = i + di - 1
                        base = (n * h + i) * w
                        for j in range(w):
                            sj = j + dj - 1
                            if 0 <= si < h and 0 <= sj < w:
                                cols[q, base + j] = x[n, ch, si, sj]
                            else:
                                cols[q, base + j] = 0.0


@numba.njit(cache=True, nogil=True)
def _col2im_t(cols, gx):
    # adjoint of _im2col_t; each pixel accumulates its 9 taps in (di, dj) order
    b, c, h, w = gx.shape
    for n in range(b):
        for ch in range(c):
            for i in range(h):
                for j in range(w):
                    acc = 0.0
                    for di in range(3):
                        si = i - di + 1
                        if si < 0 or si >= h:
                            continue
                        for dj in range(3):
                            sj = j - dj + 1
                            if 0 <= sj < w:
                                acc += cols[(ch * 3 + di) * 3 + dj, (n * h + si) * w + sj]
                    gx[n, ch, i, j] = acc


def im2col(x):
    """(b, c, h, w) -> (c*9, b*h*w) patch matrix of the zero-padded input."""
    b, c, h, w = x.shape
    cols = np.empty((c * 9, b * h * w))
    _im2col_t(x, cols)
    return cols


def col2im(cols, shape):
    gx = np.empty(shape)
    _col2im_t(np.ascontiguousarray(cols), gx)
    return gx


def _check_conv(kernels, x):
    if x.ndim != 4 or x.shape[1] != kernels.shape[1]:
        raise DimensionError(
            f"conv layer expects (batch, {kernels.shape[1]}, h, w), got {x.shape}"
        )


def conv2d_forward(kernels, bias, x):
    x = as_tensor(x)
    _check_conv(kernels, x)
    b, _, h, w = x.shape
    out_ch = kernels.shape[0]
    out = matmul(kernels.reshape(out_ch, -1), im2col(x))  # (out_ch, b*h*w)
    out += bias[:, None]
    return np.ascontiguousarray(out.reshape(out_ch, b, h, w).transpose(1, 0, 2, 3))


def conv2d_backward(kernels, x, grad_out):
    """Return ``(grad_kernels, grad_bias, grad_x)`` for :func:`conv2d_forward`."""
    x = as_tensor(x)
    _check_conv(kernels, x)
    b, c, h, w = x.shape
    out_ch = kernels.shape[0]
    if grad_out.shape != (b, out_ch, h, w):
        raise DimensionError(
            f"conv backward: grad {grad_out.shape} does not match output {(b, out_ch, h, w)}"
        )
    g = np.ascontiguousarray(grad_out.transpose(1, 0, 2, 3).reshape(out_ch, b * h * w))
    cols = im2col(x)
    grad_k = matmul(g, np.ascontiguousarray(cols.T)).reshape(kernels.shape)
    grad_b = g.sum(axis=1)
    grad_cols = matmul(np.ascontiguousarray(kernels.reshape(out_ch, -1).T), g)
    return grad_k, grad_b, col2im(grad_cols, x.shape)


# max-pool


class PoolIndex(NamedTuple):
    """Window-local argmax (0..3, row-major) plus the pooled input's shape."""

    argmax: np.ndarray
    input_shape: tuple


def maxpool2_forward(x):
    x = as_tensor(x)
    if x.ndim != 4 or x.shape[2] < 2 or x.shape[3] < 2:
        raise DimensionError(f"2x2 max-pool needs (b, c, h>=2, w>=2), got {x.shape}")
    b, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    win = (
        x[:, :, : 2 * ho, : 2 * wo]
        .reshape(b, c, ho, 2, wo, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, ho, wo, 4)
    )
    # np.argmax picks the first maximum, i.e. the row-major tie-break
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), PoolIndex(idx, x.shape)


def maxpool2_backward(index, grad_out):
    idx, shape = index
    b, c, h, w = shape
    ho, wo = h // 2, w // 2
    if grad_out.shape != (b, c, ho, wo):
        raise DimensionError(
            f"max-pool backward: grad {grad_out.shape} does not match {(b, c, ho, wo)}"
        )
    win = np.zeros((b, c, ho, wo, 4))
    np.put_along_axis(win, idx[..., None], grad_out[..., None], axis=-1)
    grad_x = np.zeros(shape)
    grad_x[:, :, : 2 * ho, : 2 * wo] = (
        win.reshape(b, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, 2 * ho, 2 * wo)
    )
    return grad_x


# relu


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_out):
    # subgradient at exactly 0 is 0
    return np.where(x > 0, grad_out, 0.0)


# loss


def softmax_xent(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns ``(loss, grad_logits, probs)``. The softmax is shifted by the row
    max before exponentiating, so large logits do not overflow.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"{n} logit rows but labels have shape {labels.shape}")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"labels must lie in [0, {k - 1}]")
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=1, keepdims=True)
    probs = e / s
    rows = np.arange(n)
    loss = float(np.mean(np.log(s[:, 0]) - z[rows, labels])) if n else 0.0
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    grad /= max(n, 1)
    return loss, grad, probs


# layers and models


class Dense:
    kind = "dense"

    def __init__(self, n_in, n_out):
        self.n_in, self.n_out = n_in, n_out
        self.weights = np.zeros((n_in, n_out))
        self.bias = np.zeros(n_out)

    @property
    def params(self):
        return [self.weights, self.bias]

    @property
    def fan_in(self):
        return self.n_in

    def forward(self, x):
        return dense_forward(self.weights, self.bias, x), x

    def backward(self, cache, grad):
        gw, gb, gx = dense_backward(self.weights, cache, grad)
        return [gw, gb], gx


class Conv3x3:
    kind = "conv"

    def __init__(self, in_ch, out_ch):
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernels = np.zeros((out_ch, in_ch, 3, 3))
        self.bias = np.zeros(out_ch)

    @property
    def params(self):
        return [self.kernels, self.bias]

    @property
    def fan_in(self):
        return self.in_ch * 9

    def forward(self, x):
        return conv2d_forward(self.kernels, self.bias, x), x

    def backward(self, cache, grad):
        gk, gb, gx = conv2d_backward(self.kernels, cache, grad)
        return [gk, gb], gx


class ReLU:
    kind = "relu"
    params = []

    def forward(self, x):
        return relu(x), x

    def backward(self, cache, grad):
        return [], relu_backward(cache, grad)


class MaxPool2:
    kind = "pool"
    params = []

    def forward(self, x):
        return maxpool2_forward(x)

    def backward(self, cache, grad):
        return [], maxpool2_backward(cache, grad)


class Flatten:
    kind = "flatten"
    params = []

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, grad):
        return [], grad.reshape(cache)


class BatchActivations(NamedTuple):
    """Per-layer caches from one forward pass, plus the resulting logits."""

    caches: list
    logits: np.ndarray
    input_shape: tuple


def forward_layers(layers, x):
    x = as_tensor(x)
    input_shape = x.shape
    caches = []
    for layer in layers:
        x, cache = layer.forward(x)
        caches.append(cache)
    return x, BatchActivations(caches, x, input_shape)


def backward_layers(layers, acts, labels):
    """Backpropagate softmax cross-entropy through ``layers``.

    Returns ``(param_grads, input_grads, loss)`` where ``param_grads`` is a flat
    list aligned with the concatenation of every layer's ``params``.
    """
    loss, grad, _ = softmax_xent(acts.logits, labels)
    per_layer = []
    for layer, cache in zip(reversed(layers), reversed(acts.caches)):
        pg, grad = layer.backward(cache, grad)
        per_layer.append(pg)
    param_grads = [g for pg in reversed(per_layer) for g in pg]
    return param_grads, grad, loss
