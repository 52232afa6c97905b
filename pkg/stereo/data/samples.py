"""Stereo samples and dataset splits."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from app.config import KittiEdition
from stereo.errors import ShapeError
from stereo.rng import stream

logger = logging.getLogger(__name__)

# (edition, source size) -> training images; everything else splits 80/20
KITTI_SPLITS = {
    (KittiEdition.KITTI2012, 194): 160,
    (KittiEdition.KITTI2015, 200): 160,
}


@dataclass
class StereoSample:
    """
    One rectified pair with optional sparse ground truth.

    Images are (channels, rows, cols) float32 intensities. ``gt`` holds
    disparities wherever ``gt_valid``; ``noc`` marks valid pixels that are
    also visible in the right view.
    """

    id: str
    left: np.ndarray
    right: np.ndarray
    gt: Optional[np.ndarray] = None
    gt_valid: Optional[np.ndarray] = None
    noc: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.left.ndim != 3 or self.right.ndim != 3:
            raise ShapeError(f"{self.id}: images must be (channels, rows, cols)")
        if self.left.shape != self.right.shape:
            raise ShapeError(
                f"{self.id}: left {self.left.shape} and right {self.right.shape} differ in size"
            )
        if self.gt is None:
            return
        if self.gt.shape != self.shape:
            raise ShapeError(f"{self.id}: ground truth {self.gt.shape} does not match image {self.shape}")
        if self.gt_valid is None:
            self.gt_valid = np.isfinite(self.gt)
        if self.noc is None:
            self.noc = self.gt_valid.copy()
        if np.any(self.gt[self.gt_valid] < 0):
            raise ShapeError(f"{self.id}: negative ground-truth disparity")
        if np.any(self.noc & ~self.gt_valid):
            raise ShapeError(f"{self.id}: non-occluded mask extends beyond valid ground truth")

    @property
    def shape(self):
        return self.left.shape[1:]

    @property
    def has_gt(self) -> bool:
        return self.gt is not None


@dataclass(frozen=True)
class DatasetSplit:
    train: List[str]
    validation: List[str]
    seed: int


def make_split(ids: Sequence[str], edition: Optional[KittiEdition], seed: int) -> DatasetSplit:
    """
    Random disjoint train/validation split, deterministic per seed.

    Full KITTI training sets keep 160 training images; other sizes split 80/20.
    """
    ids = sorted(ids)
    key = (KittiEdition(edition), len(ids)) if edition is not None else None
    n_train = KITTI_SPLITS.get(key, int(round(0.8 * len(ids))))
    order = stream(seed, "split").permutation(len(ids))
    train = sorted(ids[k] for k in order[:n_train])
    validation = sorted(ids[k] for k in order[n_train:])
    logger.info("split %d ids: %d train / %d validation (seed %d)", len(ids), len(train), len(validation), seed)
    return DatasetSplit(train=train, validation=validation, seed=seed)
