"""Correlation stages turning feature maps into disparity cost volumes."""

from stereo.correlation.head import HEAD_KERNELS, CorrHead, learned_scores
from stereo.correlation.model import (
    StereoModel,
    build_model,
    rebuild_scores_variable_D,
    score_volume,
)
from stereo.correlation.volume import (
    build_psi,
    check_pair,
    disparity_mask,
    inner_product_volume,
    sentinel,
)

__all__ = [
    "HEAD_KERNELS",
    "CorrHead",
    "StereoModel",
    "build_model",
    "build_psi",
    "check_pair",
    "disparity_mask",
    "inner_product_volume",
    "learned_scores",
    "rebuild_scores_variable_D",
    "score_volume",
    "sentinel",
]
