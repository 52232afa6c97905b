"""Reverse-mode differentiable numeric core."""

from stereo.tensor.gradcheck import gradcheck, max_relative_error
from stereo.tensor.ops import (
    BN_EPS,
    BN_MOMENTUM,
    RunningMoments,
    batchnorm,
    conv2d,
    crop,
    cross_entropy,
    deconv2,
    maxpool2,
    pad,
    relu,
    reshape,
    softmax_xent,
)
from stereo.tensor.optim import Adam, AdamState, adam_step
from stereo.tensor.tensor import Function, OpKind, Tensor

__all__ = [
    "Adam",
    "AdamState",
    "BN_EPS",
    "BN_MOMENTUM",
    "Function",
    "OpKind",
    "RunningMoments",
    "Tensor",
    "adam_step",
    "batchnorm",
    "conv2d",
    "crop",
    "cross_entropy",
    "deconv2",
    "gradcheck",
    "max_relative_error",
    "maxpool2",
    "pad",
    "relu",
    "reshape",
    "softmax_xent",
]
