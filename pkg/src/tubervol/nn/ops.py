"""Forward + exact-backward kernels: dense, conv, pooling, activations.

Image tensors are (N, H, W, C): channels-last keeps every im2col patch
and col2im scatter a contiguous block copy, which is what makes CPU
training viable. Convolutions are 3x3/stride 1/padding 1 by default, max
pooling is 4x4/stride 2/padding 1 with -inf padding so a padded element
can never win the max.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatchError
from .tensor import DiffTensor, make_output


def _require_shape(tensor: DiffTensor, ndim: int, what: str) -> None:
    if tensor.values.ndim != ndim:
        raise ShapeMismatchError(f"{what} expects {ndim}D input, got shape {tensor.shape}")


def dense(x: DiffTensor, weights: DiffTensor, bias: DiffTensor) -> DiffTensor:
    """x (N, d_in) @ weights (d_in, d_out) + bias (d_out,)."""
    _require_shape(x, 2, "dense")
    if x.shape[1] != weights.shape[0]:
        raise ShapeMismatchError(
            f"dense: input {x.shape} incompatible with weights {weights.shape}"
        )
    if bias.shape != (weights.shape[1],):
        raise ShapeMismatchError(f"dense: bias {bias.shape} vs weights {weights.shape}")
    out = x.values @ weights.values + bias.values

    def backward(grad):
        if x.requires_grad:
            x.accumulate_grad(grad @ weights.values.T)
        if weights.requires_grad:
            weights.accumulate_grad(x.values.T @ grad)
        if bias.requires_grad:
            bias.accumulate_grad(grad.sum(axis=0))

    return make_output(out, (x, weights, bias), backward)


def _im2col(x: np.ndarray, k: int, pad: int) -> np.ndarray:
    """(N, H, W, C) -> contiguous (N*Ho*Wo, k*k*C) patch matrix."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(x, (k, k), axis=(1, 2))  # (N, Ho, Wo, C, k, k)
    n, ho, wo = win.shape[:3]
    # (ki, kj, C) flat order: each patch copies as k runs of k*C floats
    flat = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))
    return flat.reshape(n * ho * wo, k * k * x.shape[3])


def conv2d(x: DiffTensor, kernels: DiffTensor, bias: DiffTensor, pad: int = 1) -> DiffTensor:
    """Stride-1 cross-correlation on (N, H, W, C_in) input.

    kernels (C_out, C_in, k, k), bias (C_out,). Output (N, Ho, Wo, C_out).
    """
    _require_shape(x, 4, "conv2d")
    c_out, c_in, k, k2 = kernels.shape
    if k != k2:
        raise ShapeMismatchError(f"conv2d: kernels must be square, got {kernels.shape}")
    if x.shape[3] != c_in:
        raise ShapeMismatchError(
            f"conv2d: input {x.shape} has {x.shape[3]} channels, kernels {kernels.shape} expect {c_in}"
        )
    if bias.shape != (c_out,):
        raise ShapeMismatchError(f"conv2d: bias {bias.shape} vs kernels {kernels.shape}")

    n, h, w = x.shape[0], x.shape[1], x.shape[2]
    ho, wo = h + 2 * pad - k + 1, w + 2 * pad - k + 1
    flat = _im2col(x.values, k, pad)
    # weights to (ki, kj, C_in, C_out) to match the patch layout
    w2d = np.ascontiguousarray(kernels.values.transpose(2, 3, 1, 0)).reshape(
        k * k * c_in, c_out
    )
    out = (flat @ w2d).reshape(n, ho, wo, c_out) + bias.values

    def backward(grad):
        g2d = grad.reshape(n * ho * wo, c_out)
        if bias.requires_grad:
            bias.accumulate_grad(g2d.sum(axis=0))
        if kernels.requires_grad:
            # flat was captured from the forward pass; one wide GEMM
            gw = (flat.T @ g2d).reshape(k, k, c_in, c_out)
            kernels.accumulate_grad(gw.transpose(3, 2, 0, 1))
        if x.requires_grad:
            # col2im: patch gradients scattered back with slice adds;
            # channels-last keeps every add a contiguous block
            pg = (g2d @ w2d.T).reshape(n, ho, wo, k, k, c_in)
            gxp = np.zeros((n, h + 2 * pad, w + 2 * pad, c_in), dtype=grad.dtype)
            for ki in range(k):
                for kj in range(k):
                    gxp[:, ki : ki + ho, kj : kj + wo, :] += pg[:, :, :, ki, kj, :]
            x.accumulate_grad(gxp[:, pad : pad + h, pad : pad + w, :])

    return make_output(out, (x, kernels, bias), backward)


def maxpool2d(x: DiffTensor, kernel: int = 4, stride: int = 2, pad: int = 1) -> DiffTensor:
    """Max pooling on (N, H, W, C) with -inf padding (padding never wins)."""
    _require_shape(x, 4, "maxpool2d")
    n, h, w, c = x.shape
    if h + 2 * pad < kernel or w + 2 * pad < kernel:
        raise ShapeMismatchError(f"maxpool2d: input {x.shape} smaller than kernel {kernel}")
    xp = np.pad(x.values, ((0, 0), (pad, pad), (pad, pad), (0, 0)), constant_values=-np.inf)
    ho = (h + 2 * pad - kernel) // stride + 1
    wo = (w + 2 * pad - kernel) // stride + 1

    def row_slice(arr, r, length):
        return arr[:, r : r + (length - 1) * stride + 1 : stride]

    def col_slice(arr, s, length):
        return arr[:, :, s : s + (length - 1) * stride + 1 : stride]

    # separable max: reduce rows, then columns (block-contiguous slices)
    rows = row_slice(xp, 0, ho).copy()
    for r in range(1, kernel):
        np.maximum(rows, row_slice(xp, r, ho), out=rows)
    out = col_slice(rows, 0, wo).copy()
    for s in range(1, kernel):
        np.maximum(out, col_slice(rows, s, wo), out=out)

    def backward(grad):
        if not x.requires_grad:
            return
        # route each output gradient to the first window element equal to
        # the max (row-major window order, matching argmax tie-breaking)
        gxp = np.zeros_like(xp)
        consumed = np.zeros_like(out, dtype=bool)
        for r in range(kernel):
            for s in range(kernel):
                src = col_slice(row_slice(xp, r, ho), s, wo)
                hit = (src == out) & ~consumed
                col_slice(row_slice(gxp, r, ho), s, wo)[...] += np.where(hit, grad, 0)
                consumed |= hit
        x.accumulate_grad(gxp[:, pad : pad + h, pad : pad + w, :])

    return make_output(out, (x,), backward)


def leaky_relu(x: DiffTensor, slope: float = 0.2) -> DiffTensor:
    out = np.where(x.values > 0, x.values, slope * x.values)

    def backward(grad):
        if x.requires_grad:
            x.accumulate_grad(np.where(x.values > 0, grad, slope * grad))

    return make_output(out, (x,), backward)


def relu(x: DiffTensor) -> DiffTensor:
    out = np.maximum(x.values, 0)

    def backward(grad):
        if x.requires_grad:
            x.accumulate_grad(np.where(x.values > 0, grad, 0))

    return make_output(out, (x,), backward)


def tanh(x: DiffTensor) -> DiffTensor:
    out = np.tanh(x.values)

    def backward(grad):
        if x.requires_grad:
            x.accumulate_grad(grad * (1.0 - out * out))

    return make_output(out, (x,), backward)


def flatten(x: DiffTensor) -> DiffTensor:
    """(N, ...) -> (N, prod(...))."""
    n = x.shape[0]
    out = x.values.reshape(n, -1)

    def backward(grad):
        if x.requires_grad:
            x.accumulate_grad(grad.reshape(x.shape))

    return make_output(out, (x,), backward)


def add(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"add: {a.shape} vs {b.shape}")
    out = a.values + b.values

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad)
        if b.requires_grad:
            b.accumulate_grad(grad)

    return make_output(out, (a, b), backward)


def scale(x: DiffTensor, factor: float) -> DiffTensor:
    out = x.values * factor

    def backward(grad):
        if x.requires_grad:
            x.accumulate_grad(grad * factor)

    return make_output(out, (x,), backward)


def concat_columns(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    """Concatenate two (N, *) matrices along axis 1."""
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatchError(f"concat: {a.shape} vs {b.shape}")
    out = np.concatenate([a.values, b.values], axis=1)
    na = a.shape[1]

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad[:, :na])
        if b.requires_grad:
            b.accumulate_grad(grad[:, na:])

    return make_output(out, (a, b), backward)


def gather_rows(x: DiffTensor, index: np.ndarray) -> DiffTensor:
    """Row lookup x[index]; rows may repeat (latent-code batching)."""
    index = np.asarray(index, dtype=np.int64)
    out = x.values[index]

    def backward(grad):
        if x.requires_grad:
            gx = np.zeros_like(x.values)
            np.add.at(gx, index, grad)
            x.accumulate_grad(gx)

    return make_output(out, (x,), backward)
