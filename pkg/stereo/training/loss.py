"""Per-pixel (D+1)-way classification loss over a batch of patches."""

import logging
from typing import List, Tuple

import numpy as np

from stereo.correlation import StereoModel, disparity_mask
from stereo.errors import ShapeError
from stereo.tensor import Tensor, cross_entropy, reshape
from stereo.training.sampler import PatchExample

logger = logging.getLogger(__name__)


def stack_batch(examples: List[PatchExample], dtype) -> Tuple[Tensor, Tensor, np.ndarray]:
    left = Tensor(np.stack([ex.left for ex in examples]).astype(dtype))
    right = Tensor(np.stack([ex.right for ex in examples]).astype(dtype))
    first_cols = np.array([ex.first_col for ex in examples], dtype=np.int64)
    return left, right, first_cols


def batch_targets(examples: List[PatchExample]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flat (targets, weights) over every patch pixel.

    Each example's labelled pixels share weight 1 / (examples * labelled), so
    the weighted sum is the mean over examples of the mean pixel loss.
    Unlabelled pixels get weight 0 and the always-valid target 0.
    A pixel may carry at most one target.
    """
    size = examples[0].size
    pixels = size * size
    targets = np.zeros(len(examples) * pixels, dtype=np.int64)
    weights = np.zeros(len(examples) * pixels)
    for index, ex in enumerate(examples):
        if ex.labelled == 0:
            raise ShapeError(f"patch from {ex.sample_id} has no labelled pixel")
        flat = index * pixels + ex.target_rows * size + ex.target_cols
        if np.unique(flat).size != flat.size:
            raise ShapeError(f"patch from {ex.sample_id} labels a pixel more than once")
        targets[flat] = ex.target_disp
        weights[flat] = 1.0 / (len(examples) * ex.labelled)
    return targets, weights


def patch_loss(model: StereoModel, examples: List[PatchExample], training: bool = True) -> Tensor:
    """
    Mean softmax cross-entropy of the true disparity against the scores.

    Disparities whose right pixel is outside the image are removed from the
    softmax support. The returned scalar tensor back-propagates into both
    branches (and the head in learned mode).
    """
    if not examples:
        raise ShapeError("empty patch batch")
    max_disp = examples[0].right.shape[2] - examples[0].size
    left, right, first_cols = stack_batch(examples, model.dtype)
    left_features, right_features = model.features(left, right, training=training)
    scores = model.scores(
        left_features, right_features, max_disp=max_disp, offset=max_disp, first_col=first_cols
    )
    batch, rows, cols, depth = scores.shape
    logits = reshape(scores, (batch * rows * cols, depth))
    valid = np.repeat(disparity_mask(batch, cols, max_disp, first_cols)[:, None], rows, axis=1)
    targets, weights = batch_targets(examples)
    return cross_entropy(logits, targets, weights, valid=valid.reshape(batch * rows * cols, depth))
