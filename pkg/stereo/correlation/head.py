"""Learned correlation head evaluated along the disparity axis of Psi."""

import logging
from typing import Dict, Tuple

import numpy as np

from stereo.errors import ConfigurationError, ShapeError
from stereo.tensor import Tensor, conv2d, relu, reshape

logger = logging.getLogger(__name__)

HEAD_KERNELS = (1, 3)


class CorrHead:
    """
    Two-layer head: 2*theta hidden units with ReLU, then one linear output.

    Both layers use 1 x ``kernel`` filters along the disparity axis, zero
    padded so the volume keeps D+1 entries. Nothing depends on D or on the
    image size.
    """

    def __init__(self, theta: int, kernel: int = 3, seed: int = 0, init_std=None, dtype=np.float32):
        if kernel not in HEAD_KERNELS:
            raise ConfigurationError(f"head kernel must be one of {HEAD_KERNELS}, got {kernel}")
        self.theta = theta
        self.kernel = kernel
        width = 2 * theta
        rng = np.random.default_rng(seed)

        def init(shape, fan_in):
            std = init_std if init_std is not None else np.sqrt(2.0 / fan_in)
            return (rng.standard_normal(shape) * std).astype(dtype)

        self.hidden_weight = Tensor(
            init((width, width, 1, kernel), width * kernel), requires_grad=True, name="corr.hidden.weight"
        )
        self.hidden_bias = Tensor(np.zeros(width, dtype=dtype), requires_grad=True, name="corr.hidden.bias")
        self.out_weight = Tensor(
            init((1, width, 1, kernel), width * kernel), requires_grad=True, name="corr.out.weight"
        )
        self.out_bias = Tensor(np.zeros(1, dtype=dtype), requires_grad=True, name="corr.out.bias")

    @property
    def channels(self) -> int:
        return 2 * self.theta

    def parameters(self) -> Dict[str, Tensor]:
        return {
            t.name: t for t in (self.hidden_weight, self.hidden_bias, self.out_weight, self.out_bias)
        }

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.parameters().values())

    def astype(self, dtype) -> "CorrHead":
        for tensor in self.parameters().values():
            tensor.data = tensor.data.astype(dtype)
            tensor.zero_grad()
        return self

    def load_state(self, blobs: Dict[str, np.ndarray]) -> "CorrHead":
        for name, tensor in self.parameters().items():
            if name not in blobs:
                raise ShapeError(f"missing head tensor {name}")
            if blobs[name].shape != tensor.shape:
                raise ShapeError(f"head tensor {name} has shape {blobs[name].shape}, expected {tensor.shape}")
            tensor.data = blobs[name].copy()
        return self

    def state(self) -> Dict[str, np.ndarray]:
        return {name: t.data for name, t in self.parameters().items()}


def learned_scores(psi: Tensor, head: CorrHead, grid: Tuple[int, int, int]) -> Tensor:
    """
    Scores (batch, rows, cols, D+1) from a Psi volume of ``batch * rows * cols`` pixels.

    Each image row is one batch item of the head convolutions, so a row's
    scores come out the same whichever band it is evaluated in.
    """
    if psi.data.ndim != 3:
        raise ShapeError(f"Psi must be (pixels, D+1, channels), got {psi.shape}")
    pixels, depth, channels = psi.shape
    if channels != head.channels:
        raise ShapeError(
            f"Psi has {channels} channels, head expects {head.channels}", axis="channels"
        )
    batch, rows, cols = grid
    if batch * rows * cols != pixels:
        raise ShapeError(f"Psi holds {pixels} pixels, grid {grid} needs {batch * rows * cols}")

    pad = head.kernel // 2
    x = reshape(psi, (batch * rows, cols, depth, channels))
    x = reshape(x, (batch * rows, channels, cols, depth), axes=(0, 3, 1, 2))
    hidden = relu(conv2d(x, head.hidden_weight, head.hidden_bias, stride=1, padding=(0, pad)))
    out = conv2d(hidden, head.out_weight, head.out_bias, stride=1, padding=(0, pad))
    return reshape(out, (batch, rows, cols, depth))
