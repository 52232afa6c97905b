"""Random training patches with sparse disparity targets."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from stereo.data.images import normalize
from stereo.data.samples import StereoSample
from stereo.errors import ShapeError
from stereo.training.config import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class PatchExample:
    """
    Left patch (C, s, s) at (top, first_col) and right patch (C, s, s + D).

    The right patch covers right-image columns [first_col - D, first_col + s),
    zero-filled left of the image. Targets are patch coordinates with integer
    disparities in [0, D].
    """

    sample_id: str
    top: int
    first_col: int
    left: np.ndarray
    right: np.ndarray
    target_rows: np.ndarray
    target_cols: np.ndarray
    target_disp: np.ndarray

    @property
    def size(self) -> int:
        return self.left.shape[1]

    @property
    def labelled(self) -> int:
        return int(self.target_disp.size)


def prepare(sample: StereoSample) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized (C, H, W) left and right images."""
    return normalize(sample.left)[0], normalize(sample.right)[0]


def patch_targets(
    sample: StereoSample, top: int, first_col: int, size: int, max_disp: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Labelled pixels of the patch.

    Ground truth is rounded to the nearest integer. Pixels beyond ``max_disp``
    and pixels whose partner would fall left of the right image are dropped.
    """
    gt = sample.gt[top : top + size, first_col : first_col + size]
    valid = sample.gt_valid[top : top + size, first_col : first_col + size]
    disp = np.floor(gt + 0.5).astype(np.int64)
    cols = np.arange(size)[None, :]
    keep = valid & (disp >= 0) & (disp <= max_disp) & (first_col + cols - disp >= 0)
    rows, columns = np.nonzero(keep)
    return rows, columns, disp[rows, columns]


def sample_patch(
    sample: StereoSample,
    cfg: TrainConfig,
    rng: np.random.Generator,
    images: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Optional[PatchExample]:
    """
    Draw one patch pair with at least one labelled pixel.

    Returns None (and logs a warning) when ``cfg.max_patch_retries`` draws
    find no labelled pixel.
    """
    if not sample.has_gt:
        raise ShapeError(f"{sample.id}: training needs ground truth")
    size, max_disp = cfg.patch_size, cfg.max_disp
    rows, cols = sample.shape
    if rows < size or cols < size:
        raise ShapeError(f"{sample.id}: {rows}x{cols} image is smaller than the {size}px patch")
    left_img, right_img = images if images is not None else prepare(sample)

    for _ in range(cfg.max_patch_retries):
        top = int(rng.integers(0, rows - size + 1))
        first_col = int(rng.integers(0, cols - size + 1))
        target_rows, target_cols, target_disp = patch_targets(sample, top, first_col, size, max_disp)
        if target_disp.size == 0:
            continue

        left = left_img[:, top : top + size, first_col : first_col + size]
        right = np.zeros((right_img.shape[0], size, size + max_disp), dtype=right_img.dtype)
        start = first_col - max_disp
        src = slice(max(0, start), first_col + size)
        right[:, :, src.start - start :] = right_img[:, top : top + size, src]
        return PatchExample(
            sample_id=sample.id,
            top=top,
            first_col=first_col,
            left=np.ascontiguousarray(left),
            right=right,
            target_rows=target_rows,
            target_cols=target_cols,
            target_disp=target_disp,
        )

    logger.warning(
        "no labelled pixel in %d patches of %s; skipping", cfg.max_patch_retries, sample.id
    )
    return None
