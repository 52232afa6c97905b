"""KITTI stereo directory layouts."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from app.config import ColorMode, Config, KittiEdition
from stereo.data.disparity_png import read_disparity, write_disparity
from stereo.data.images import load_image, save_image
from stereo.data.samples import StereoSample
from stereo.errors import FormatError, ShapeError

logger = logging.getLogger(__name__)

FRAME_SUFFIX = "_10.png"

# sub-directories per edition: left, right, all-pixel GT, non-occluded GT
LAYOUTS: Dict[KittiEdition, Dict[str, str]] = {
    KittiEdition.KITTI2012: {
        "left": "colored_0",
        "right": "colored_1",
        "occ": "disp_occ",
        "noc": "disp_noc",
    },
    KittiEdition.KITTI2015: {
        "left": "image_2",
        "right": "image_3",
        "occ": "disp_occ_0",
        "noc": "disp_noc_0",
    },
}

# grayscale KITTI 2012 releases ship image_0/image_1 instead of colored_0/colored_1
GRAY_FALLBACK = {"colored_0": "image_0", "colored_1": "image_1"}


def _image_dir(root: Path, name: str) -> Path:
    path = root / name
    if not path.is_dir() and name in GRAY_FALLBACK and (root / GRAY_FALLBACK[name]).is_dir():
        return root / GRAY_FALLBACK[name]
    return path


def frame_ids(root: Union[str, Path], edition: KittiEdition) -> List[str]:
    layout = LAYOUTS[KittiEdition(edition)]
    left_dir = _image_dir(Path(root), layout["left"])
    if not left_dir.is_dir():
        raise FormatError(f"missing left image directory {left_dir.name}", path=str(root))
    return sorted(p.name[: -len(FRAME_SUFFIX)] for p in left_dir.glob("*" + FRAME_SUFFIX))


def load_sample(
    root: Union[str, Path],
    edition: KittiEdition,
    frame: str,
    color_mode: Optional[ColorMode] = None,
) -> StereoSample:
    root = Path(root)
    layout = LAYOUTS[KittiEdition(edition)]
    name = frame + FRAME_SUFFIX
    left = load_image(_image_dir(root, layout["left"]) / name, color_mode)
    right = load_image(_image_dir(root, layout["right"]) / name, color_mode)

    gt = gt_valid = noc = None
    occ_path = root / layout["occ"] / name
    if occ_path.is_file():
        gt, gt_valid = read_disparity(occ_path)
        noc_path = root / layout["noc"] / name
        if noc_path.is_file():
            _, noc = read_disparity(noc_path)
            noc = noc & gt_valid
        else:
            noc = gt_valid.copy()
    try:
        return StereoSample(id=frame, left=left, right=right, gt=gt, gt_valid=gt_valid, noc=noc)
    except ShapeError as exc:
        raise FormatError(str(exc), path=str(root / name)) from exc


def load_kitti(
    root: Union[str, Path],
    edition: KittiEdition = KittiEdition.KITTI2015,
    color_mode: Optional[ColorMode] = None,
) -> List[StereoSample]:
    """
    Load every frame of a KITTI training (or testing) root.

    Frames without disparity files load with ``gt=None`` for inference-only use.
    """
    edition = KittiEdition(edition)
    color_mode = ColorMode(color_mode or Config.COLOR_MODE)
    samples = [load_sample(root, edition, frame, color_mode) for frame in frame_ids(root, edition)]
    labelled = sum(sample.has_gt for sample in samples)
    logger.info(
        "loaded %d KITTI %s samples from %s (%d with ground truth)",
        len(samples),
        edition.value,
        root,
        labelled,
    )
    return samples


def write_kitti(
    samples: List[StereoSample],
    root: Union[str, Path],
    edition: KittiEdition = KittiEdition.KITTI2015,
) -> Path:
    """Write samples in the KITTI layout so every loader and tool reads them unchanged."""
    root = Path(root)
    layout = LAYOUTS[KittiEdition(edition)]
    for sample in samples:
        name = sample.id + FRAME_SUFFIX
        save_image(root / layout["left"] / name, sample.left)
        save_image(root / layout["right"] / name, sample.right)
        if sample.has_gt:
            write_disparity(root / layout["occ"] / name, sample.gt, sample.gt_valid)
            write_disparity(root / layout["noc"] / name, sample.gt, sample.noc)
    logger.info("wrote %d samples to %s", len(samples), root)
    return root


def frame_name(index: int) -> str:
    return f"{index:06d}"


def disparity_histogram(sample: StereoSample) -> Dict[int, int]:
    """Counts of integer ground-truth disparities over valid pixels."""
    values, counts = np.unique(np.round(sample.gt[sample.gt_valid]).astype(int), return_counts=True)
    return dict(zip(values.tolist(), counts.tolist()))
