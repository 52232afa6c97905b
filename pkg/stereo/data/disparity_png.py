"""16-bit disparity PNGs: stored value = disparity * 256, 0 = no value."""

import io
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from stereo.errors import FormatError

SCALE = 256.0
MAX_CODE = np.iinfo(np.uint16).max


def disparity_png_encode(disparity: np.ndarray, valid: Optional[np.ndarray] = None) -> bytes:
    """
    Encode a disparity map; pixels outside ``valid`` (or NaN) are written as 0.

    A valid disparity of exactly 0 also encodes to 0, so it reads back as
    "no value".
    """
    disparity = np.asarray(disparity, dtype=np.float64)
    if disparity.ndim != 2:
        raise FormatError(f"disparity map must be 2-D, got shape {disparity.shape}")
    if valid is None:
        valid = np.isfinite(disparity)
    values = np.where(valid, disparity, 0.0)
    if np.any(values < 0):
        raise FormatError("negative disparity cannot be encoded")
    codes = np.round(values * SCALE)
    if np.any(codes > MAX_CODE):
        raise FormatError(f"disparity {values.max():g} is beyond the 16-bit range (< {MAX_CODE / SCALE:g})")

    buffer = io.BytesIO()
    Image.fromarray(codes.astype(np.uint16)).save(buffer, format="PNG")
    return buffer.getvalue()


def disparity_png_decode(payload: bytes, path: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Return (disparity float32, valid mask); invalid pixels hold 0."""
    try:
        with Image.open(io.BytesIO(payload)) as image:
            codes = np.array(image)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise FormatError(f"not a readable PNG: {exc}", path=path) from exc
    if codes.ndim != 2 or codes.dtype.kind not in "iu":
        raise FormatError(f"expected a single-channel 16-bit PNG, got {codes.dtype} {codes.shape}", path=path)
    codes = codes.astype(np.int64)
    valid = codes > 0
    return (codes / SCALE).astype(np.float32), valid


def write_disparity(path: Union[str, Path], disparity: np.ndarray, valid: Optional[np.ndarray] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(disparity_png_encode(disparity, valid))
    return path


def read_disparity(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read disparity file: {exc}", path=str(path)) from exc
    return disparity_png_decode(payload, path=str(path))
