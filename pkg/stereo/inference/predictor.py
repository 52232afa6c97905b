"""One-pass full-image disparity inference with feature reuse."""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from stereo.correlation import StereoModel, disparity_mask, score_volume, sentinel
from stereo.data.images import normalize
from stereo.errors import FormatError, ShapeError
from stereo.tensor import Tensor

logger = logging.getLogger(__name__)

VOLUME_MAGIC = b"SVCV"
VOLUME_VERSION = 1


@dataclass
class DisparityPrediction:
    disparity: np.ndarray
    valid: np.ndarray
    volume: Optional[np.ndarray] = None


def argmax_disparity(volume: np.ndarray) -> np.ndarray:
    """
    Integer disparity per pixel of a (rows, cols, D+1) volume.

    Disparities whose right pixel leaves the image are never selected; ties go
    to the smallest disparity.
    """
    rows, cols, depth = volume.shape
    allowed = disparity_mask(1, cols, depth - 1)[0][None]
    masked = np.where(allowed, volume, -np.inf)
    return masked.argmax(axis=2).astype(np.int64)


def _as_image(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 4:
        if image.shape[0] != 1:
            raise ShapeError(f"expected one image, got a batch of {image.shape[0]}")
        image = image[0]
    if image.ndim == 2:
        image = image[None]
    return image


def infer(
    model: StereoModel,
    left: np.ndarray,
    right: np.ndarray,
    max_disp: Optional[int] = None,
    band_rows: Optional[int] = None,
    threads: Optional[int] = None,
    keep_volume: bool = False,
) -> DisparityPrediction:
    """
    Predict integer disparities for a rectified pair of raw images.

    Each image is normalized and passed through the branch once; scores are
    then evaluated in row bands from those shared features.
    """
    left, right = _as_image(left), _as_image(right)
    if left.shape != right.shape:
        raise ShapeError(f"left {left.shape} and right {right.shape} images differ in size")
    max_disp = max_disp or model.max_disp
    if max_disp >= left.shape[2]:
        raise ShapeError(
            f"max disparity {max_disp} must be smaller than the image width {left.shape[2]}",
            axis="cols",
        )

    left_features = model.network.extract(Tensor(normalize(left, dtype=model.dtype)), training=False)
    right_features = model.network.extract(Tensor(normalize(right, dtype=model.dtype)), training=False)
    volume = score_volume(
        model, left_features, right_features, max_disp=max_disp, band_rows=band_rows, threads=threads
    )
    # both correlation modes report out-of-image disparities as the sentinel
    allowed = disparity_mask(1, volume.shape[1], max_disp)[0][None]
    volume = np.where(allowed, volume, sentinel(volume.dtype)).astype(volume.dtype, copy=False)
    disparity = argmax_disparity(volume)
    logger.debug("inferred %dx%d disparities with D=%d", volume.shape[0], volume.shape[1], max_disp)
    return DisparityPrediction(
        disparity=disparity,
        valid=np.ones(disparity.shape, dtype=bool),
        volume=volume if keep_volume else None,
    )


def write_volume(path: Union[str, Path], volume: np.ndarray) -> Path:
    """
    Raw (rows, cols, D+1) float32 little-endian dump behind a 20-byte header.

    Scores below the float32 range, including the out-of-image sentinel of a
    double-precision volume, are stored as the float32 sentinel.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols, depth = volume.shape
    with path.open("wb") as out:
        out.write(VOLUME_MAGIC)
        out.write(struct.pack("<IIII", VOLUME_VERSION, rows, cols, depth))
        floor = sentinel(np.float32)
        out.write(np.ascontiguousarray(np.maximum(volume, floor), dtype="<f4").tobytes())
    return path


def read_volume(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    payload = path.read_bytes()
    if len(payload) < 20 or payload[:4] != VOLUME_MAGIC:
        raise FormatError("not a cost-volume dump", path=str(path))
    version, rows, cols, depth = struct.unpack("<IIII", payload[4:20])
    if version != VOLUME_VERSION:
        raise FormatError(f"unsupported cost-volume version {version}", path=str(path))
    expected = rows * cols * depth * 4
    if len(payload) - 20 != expected:
        raise FormatError(f"expected {expected} bytes of scores, found {len(payload) - 20}", path=str(path))
    return np.frombuffer(payload[20:], dtype="<f4").reshape(rows, cols, depth).astype(np.float32)
