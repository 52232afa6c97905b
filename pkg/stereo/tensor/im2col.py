"""Window gather/scatter helpers behind the convolution kernels."""

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Pair = Tuple[int, int]


def as_pair(value) -> Pair:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    return int(value), int(value)


def output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def im2col(x: np.ndarray, kernel: Pair, stride: int, padding: Pair) -> np.ndarray:
    """
    Gather sliding windows of an NCHW array.

    Returns a read-only strided view of shape (N, C, Ho, Wo, kh, kw).
    """
    kh, kw = kernel
    ph, pw = padding
    n, c, h, w = x.shape
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    ho = output_size(h, kh, stride, ph)
    wo = output_size(w, kw, stride, pw)
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return windows[:, :, : stride * (ho - 1) + 1 : stride, : stride * (wo - 1) + 1 : stride]


def col2im(
    cols: np.ndarray, x_shape: Tuple[int, int, int, int], stride: int, padding: Pair
) -> np.ndarray:
    """Scatter-add (N, C, Ho, Wo, kh, kw) windows back onto an NCHW array."""
    n, c, h, w = x_shape
    ph, pw = padding
    _, _, ho, wo, kh, kw = cols.shape
    padded = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    for a in range(kh):
        row_stop = a + stride * (ho - 1) + 1
        for b in range(kw):
            col_stop = b + stride * (wo - 1) + 1
            padded[:, :, a:row_stop:stride, b:col_stop:stride] += cols[:, :, :, :, a, b]
    return padded[:, :, ph : ph + h, pw : pw + w]


def windows_matmul(cols: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Contract (N, C, Ho, Wo, kh, kw) windows with (O, C, kh, kw) weights.

    The product runs as one matrix per batch item, so every item (and every
    image row when rows are batched) goes through an identically shaped GEMM.
    Result is (N, O, Ho, Wo).
    """
    n, c, ho, wo, kh, kw = cols.shape
    o = weights.shape[0]
    lhs = np.ascontiguousarray(cols.transpose(0, 2, 3, 1, 4, 5)).reshape(n, ho * wo, c * kh * kw)
    rhs = np.ascontiguousarray(weights.reshape(o, c * kh * kw).T)
    out = np.matmul(lhs, rhs)
    return out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)


def grad_to_cols(grad: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Spread an (N, O, Ho, Wo) gradient through (O, C, kh, kw) weights into windows."""
    n, o, ho, wo = grad.shape
    _, c, kh, kw = weights.shape
    lhs = np.ascontiguousarray(grad.transpose(0, 2, 3, 1)).reshape(n, ho * wo, o)
    out = np.matmul(lhs, weights.reshape(o, c * kh * kw))
    return out.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)


def weight_grad(grad: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """d(loss)/d(weights) from an (N, O, Ho, Wo) gradient and its windows."""
    return np.tensordot(grad, cols, axes=([0, 2, 3], [0, 2, 3]))
