"""Patch sampling, classification loss and the Adam training loop."""

from stereo.training.config import PRESET_DEFAULTS, TrainConfig
from stereo.training.loss import batch_targets, patch_loss
from stereo.training.sampler import PatchExample, patch_targets, prepare, sample_patch
from stereo.training.trainer import LOG_HEADER, TrainResult, train

__all__ = [
    "LOG_HEADER",
    "PRESET_DEFAULTS",
    "PatchExample",
    "TrainConfig",
    "TrainResult",
    "batch_targets",
    "patch_loss",
    "patch_targets",
    "prepare",
    "sample_patch",
    "train",
]
