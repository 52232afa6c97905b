"""Image decoding and per-image normalization."""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from app.config import ColorMode, Config
from stereo.errors import FormatError

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8


def load_image(path: Union[str, Path], color_mode: ColorMode = None) -> np.ndarray:
    """Decode an image file to (channels, rows, cols) float32 intensities in [0, 255]."""
    color_mode = ColorMode(color_mode or Config.COLOR_MODE)
    try:
        with Image.open(path) as image:
            converted = image.convert("L" if color_mode == ColorMode.GRAY else "RGB")
            pixels = np.asarray(converted, dtype=np.float32)
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"cannot decode image: {exc}", path=str(path)) from exc
    if pixels.ndim == 2:
        pixels = pixels[None]
    else:
        pixels = pixels.transpose(2, 0, 1)
    return np.ascontiguousarray(pixels)


def save_image(path: Union[str, Path], image: np.ndarray) -> Path:
    """Write (channels, rows, cols) intensities in [0, 255] as an 8-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(np.round(image), 0, 255).astype(np.uint8)
    pixels = pixels[0] if pixels.shape[0] == 1 else pixels.transpose(1, 2, 0)
    Image.fromarray(pixels).save(path, format="PNG")
    return path


def normalize(image: np.ndarray, dtype=np.float32) -> np.ndarray:
    """
    Zero mean, unit standard deviation per channel; returns (1, channels, rows, cols).

    Accepts (rows, cols), (channels, rows, cols) or a single-item batch.
    Constant channels come out as zeros.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[None]
    if image.ndim == 4:
        if image.shape[0] != 1:
            raise ValueError(f"normalize takes one image, got a batch of {image.shape[0]}")
        image = image[0]
    if image.size == 0:
        raise ValueError("cannot normalize an empty image")
    mean = image.mean(axis=(1, 2), keepdims=True)
    std = image.std(axis=(1, 2), keepdims=True)
    flat = std <= STD_FLOOR
    out = np.where(flat, 0.0, (image - mean) / np.where(flat, 1.0, std))
    return out[None].astype(dtype)
