"""Differentiable operations used by the siamese networks and correlation heads."""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from stereo.errors import ConfigurationError, ModelStateError, ShapeError, TargetRangeError
from stereo.tensor.im2col import (
    as_pair,
    col2im,
    grad_to_cols,
    im2col,
    output_size,
    weight_grad,
    windows_matmul,
)
from stereo.tensor.tensor import Function, OpKind, Tensor

logger = logging.getLogger(__name__)

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def _require_rank4(array: np.ndarray, what: str) -> None:
    if array.ndim != 4:
        raise ShapeError(f"{what} must be rank-4 (batch, channels, rows, cols), got {array.shape}")


class Conv2d(Function):
    kind = OpKind.CONV

    def forward(self, x, weight, bias, stride=1, padding=0):
        _require_rank4(x, "conv2d input")
        out_c, in_c, kh, kw = weight.shape
        if x.shape[1] != in_c:
            raise ShapeError(
                f"conv2d expects {in_c} input channels, got {x.shape[1]}", axis="channels"
            )
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"conv2d kernel must be odd-sized, got {kh}x{kw}", axis="kernel")
        if stride < 1:
            raise ConfigurationError(f"conv2d stride must be >= 1, got {stride}")
        if bias.shape != (out_c,):
            raise ShapeError(f"conv2d bias must have shape ({out_c},), got {bias.shape}", axis="bias")
        padding = as_pair(padding)
        for axis, size, k, p in (("rows", x.shape[2], kh, padding[0]), ("cols", x.shape[3], kw, padding[1])):
            if output_size(size, k, stride, p) < 1:
                raise ShapeError(f"conv2d input too small: {size} with kernel {k}", axis=axis)

        cols = im2col(x, (kh, kw), stride, padding)
        self.saved.update(cols=cols, weight=weight, stride=stride, padding=padding)
        return windows_matmul(cols, weight) + bias[None, :, None, None]

    def backward(self, grad):
        cols, weight = self.saved["cols"], self.saved["weight"]
        grad_x = col2im(
            grad_to_cols(grad, weight), self.input_shapes[0], self.saved["stride"], self.saved["padding"]
        )
        return grad_x, weight_grad(grad, cols), grad.sum(axis=(0, 2, 3))


class MaxPool2(Function):
    kind = OpKind.POOL

    def forward(self, x):
        _require_rank4(x, "maxpool2 input")
        n, c, h, w = x.shape
        if h % 2:
            raise ShapeError(f"maxpool2 needs an even size, got {h}", axis="rows")
        if w % 2:
            raise ShapeError(f"maxpool2 needs an even size, got {w}", axis="cols")
        windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
            n, c, h // 2, w // 2, 4
        )
        # argmax returns the first maximum, which fixes the tie rule
        argmax = windows.argmax(axis=-1)
        self.saved["argmax"] = argmax
        return np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, c, h, w = self.input_shapes[0]
        routed = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad.dtype)
        np.put_along_axis(routed, self.saved["argmax"][..., None], grad[..., None], axis=-1)
        routed = routed.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (routed.reshape(n, c, h, w),)


class Deconv2(Function):
    """
    Stride-2 3x3 transposed convolution.

    Defined as the exact adjoint of ``conv2d(stride=2, padding=1)``, which maps
    a 2H x 2W map onto H x W, so the output is exactly twice the input size.
    Weights are laid out (in_channels, out_channels, 3, 3).
    """

    kind = OpKind.DECONV

    def forward(self, y, weight, bias):
        _require_rank4(y, "deconv2 input")
        in_c, out_c, kh, kw = weight.shape
        if (kh, kw) != (3, 3):
            raise ConfigurationError(f"deconv2 requires a 3x3 kernel, got {kh}x{kw}")
        if y.shape[1] != in_c:
            raise ShapeError(
                f"deconv2 expects {in_c} input channels, got {y.shape[1]}", axis="channels"
            )
        if bias.shape != (out_c,):
            raise ShapeError(f"deconv2 bias must have shape ({out_c},), got {bias.shape}", axis="bias")
        n, _, h, w = y.shape
        out_shape = (n, out_c, 2 * h, 2 * w)
        self.saved.update(y=y, weight=weight, out_shape=out_shape)
        out = col2im(grad_to_cols(y, weight), out_shape, 2, (1, 1))
        return out + bias[None, :, None, None]

    def backward(self, grad):
        y, weight = self.saved["y"], self.saved["weight"]
        cols = im2col(grad, (3, 3), 2, (1, 1))
        grad_y = windows_matmul(cols, weight)
        grad_w = np.tensordot(y, cols, axes=([0, 2, 3], [0, 2, 3]))
        return grad_y, grad_w, grad.sum(axis=(0, 2, 3))


class RunningMoments:
    """Per-channel running mean/variance owned by a batch-norm layer."""

    def __init__(self, channels: int, momentum: float = BN_MOMENTUM):
        self.channels = channels
        self.momentum = momentum
        self.mean: Optional[np.ndarray] = None
        self.var: Optional[np.ndarray] = None

    @property
    def initialized(self) -> bool:
        return self.mean is not None and self.var is not None

    def update(self, mean: np.ndarray, var: np.ndarray) -> None:
        if not self.initialized:
            self.mean = mean.copy()
            self.var = var.copy()
            return
        self.mean = self.momentum * self.mean + (1.0 - self.momentum) * mean
        self.var = self.momentum * self.var + (1.0 - self.momentum) * var


class BatchNorm(Function):
    kind = OpKind.BATCHNORM

    def forward(self, x, gamma, beta, training=True, moments: Optional[RunningMoments] = None, eps=BN_EPS):
        _require_rank4(x, "batchnorm input")
        channels = x.shape[1]
        if gamma.shape != (channels,) or beta.shape != (channels,):
            raise ShapeError(
                f"batchnorm gamma/beta must have length {channels}", axis="channels"
            )
        if training:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            if moments is not None:
                moments.update(mean, var)
        else:
            if moments is None or not moments.initialized:
                raise ModelStateError("batchnorm in inference mode needs initialized running moments")
            mean = moments.mean.astype(x.dtype)
            var = moments.var.astype(x.dtype)

        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self.saved.update(x_hat=x_hat, inv_std=inv_std, gamma=gamma, training=training)
        return gamma[None, :, None, None] * x_hat + beta[None, :, None, None]

    def backward(self, grad):
        x_hat, inv_std, gamma = self.saved["x_hat"], self.saved["inv_std"], self.saved["gamma"]
        grad_gamma = (grad * x_hat).sum(axis=(0, 2, 3))
        grad_beta = grad.sum(axis=(0, 2, 3))
        grad_xhat = grad * gamma[None, :, None, None]
        if not self.saved["training"]:
            return grad_xhat * inv_std[None, :, None, None], grad_gamma, grad_beta

        count = grad.shape[0] * grad.shape[2] * grad.shape[3]
        sum_g = grad_xhat.sum(axis=(0, 2, 3))[None, :, None, None]
        sum_gx = (grad_xhat * x_hat).sum(axis=(0, 2, 3))[None, :, None, None]
        grad_x = (inv_std[None, :, None, None] / count) * (count * grad_xhat - sum_g - x_hat * sum_gx)
        return grad_x, grad_gamma, grad_beta


class ReLU(Function):
    kind = OpKind.RELU

    def forward(self, x):
        self.saved["mask"] = x > 0
        # NaN propagates
        return np.maximum(x, 0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.saved["mask"],)


class Pad(Function):
    """Zero-pad the bottom and right edges of an NCHW tensor."""

    kind = OpKind.PAD

    def forward(self, x, bottom=0, right=0):
        _require_rank4(x, "pad input")
        return np.pad(x, ((0, 0), (0, 0), (0, bottom), (0, right)))

    def backward(self, grad):
        _, _, h, w = self.input_shapes[0]
        return (np.ascontiguousarray(grad[:, :, :h, :w]),)


class Crop(Function):
    """Keep the top-left ``rows`` x ``cols`` corner of an NCHW tensor."""

    kind = OpKind.PAD

    def forward(self, x, rows, cols):
        _require_rank4(x, "crop input")
        return np.ascontiguousarray(x[:, :, :rows, :cols])

    def backward(self, grad):
        n, c, h, w = self.input_shapes[0]
        full = np.zeros((n, c, h, w), dtype=grad.dtype)
        full[:, :, : grad.shape[2], : grad.shape[3]] = grad
        return (full,)


class Reshape(Function):
    """Optional axis permutation followed by a reshape."""

    kind = OpKind.RESHAPE

    def forward(self, x, shape, axes: Optional[Sequence[int]] = None):
        self.saved["axes"] = axes
        if axes is not None:
            x = x.transpose(axes)
        self.saved["mid_shape"] = x.shape
        return np.ascontiguousarray(x).reshape(shape)

    def backward(self, grad):
        grad = grad.reshape(self.saved["mid_shape"])
        axes = self.saved["axes"]
        if axes is not None:
            grad = grad.transpose(np.argsort(axes))
        return (np.ascontiguousarray(grad),)


def softmax_xent(logits: np.ndarray, target: int, valid: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """
    Cross-entropy of one pixel's (D+1) scores against an integer disparity.

    ``valid`` restricts the softmax support; excluded entries get zero
    probability and zero gradient. Returns (loss, d(loss)/d(logits)).
    """
    logits = np.asarray(logits)
    if not 0 <= target < logits.shape[-1]:
        raise TargetRangeError(f"target {target} outside [0, {logits.shape[-1] - 1}]")
    if valid is not None and not valid[target]:
        raise TargetRangeError(f"target {target} is a masked disparity")
    masked = logits if valid is None else np.where(valid, logits, -np.inf)
    shifted = masked - masked.max()
    exp = np.exp(shifted)
    total = exp.sum()
    loss = float(np.log(total) - shifted[target])
    grad = exp / total
    grad[target] -= 1.0
    return loss, grad.astype(logits.dtype, copy=False)


class SoftmaxCrossEntropy(Function):
    """
    Weighted sum of per-pixel softmax cross-entropies.

    ``logits`` is (M, K); ``targets`` (M,) integer classes; ``valid`` an
    optional (M, K) support mask; ``weights`` (M,) per-pixel loss weights.
    """

    kind = OpKind.LOSS

    def forward(self, logits, targets, weights, valid=None):
        m, k = logits.shape
        targets = np.asarray(targets, dtype=np.int64)
        bad = np.flatnonzero((targets < 0) | (targets >= k))
        if bad.size:
            raise TargetRangeError(f"target {targets[bad[0]]} outside [0, {k - 1}]", pixel=int(bad[0]))
        rows = np.arange(m)
        if valid is not None:
            masked_target = np.flatnonzero(~valid[rows, targets])
            if masked_target.size:
                raise TargetRangeError("target on a masked disparity", pixel=int(masked_target[0]))
            logits = np.where(valid, logits, -np.inf)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        total = exp.sum(axis=1)
        per_pixel = np.log(total) - shifted[rows, targets]
        prob = exp / total[:, None]
        prob[rows, targets] -= 1.0
        self.saved["grad"] = prob * weights[:, None]
        return np.asarray((per_pixel * weights).sum(), dtype=logits.dtype)

    def backward(self, grad):
        return (self.saved["grad"] * grad, None, None)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding=0) -> Tensor:
    return Conv2d.apply(x, weight, bias, stride=stride, padding=padding)


def maxpool2(x: Tensor) -> Tensor:
    return MaxPool2.apply(x)


def deconv2(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return Deconv2.apply(x, weight, bias)


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    training: bool = True,
    moments: Optional[RunningMoments] = None,
) -> Tensor:
    return BatchNorm.apply(x, gamma, beta, training=training, moments=moments)


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def pad(x: Tensor, bottom: int, right: int) -> Tensor:
    return Pad.apply(x, bottom=bottom, right=right)


def crop(x: Tensor, rows: int, cols: int) -> Tensor:
    return Crop.apply(x, rows=rows, cols=cols)


def reshape(x: Tensor, shape: Sequence[int], axes: Optional[Sequence[int]] = None) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape), axes=axes)


def cross_entropy(
    logits: Tensor,
    targets: np.ndarray,
    weights: np.ndarray,
    valid: Optional[np.ndarray] = None,
) -> Tensor:
    targets_t = Tensor(np.asarray(targets, dtype=logits.dtype))
    weights_t = Tensor(np.asarray(weights, dtype=logits.dtype))
    return SoftmaxCrossEntropy.apply(logits, targets_t, weights_t, valid=valid)
