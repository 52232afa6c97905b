"""Synthetic stereo scenes with exact ground truth."""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.ndimage import uniform_filter

from app.config import Config
from stereo.data.kitti import frame_name
from stereo.data.samples import StereoSample
from stereo.rng import stream

logger = logging.getLogger(__name__)

MIN_BAND_WIDTH = 9


class SynthConfig(BaseModel):
    """
    Scene generator settings.

    Each scene is a fronto-parallel textured background at ``bg_disparity``
    with ``occluders`` rectangles in front of it at larger disparities.
    ``None`` disparities are drawn per scene.
    """

    count: int = Field(default=20, ge=1)
    rows: int = Field(default=64, ge=4)
    cols: int = Field(default=96, ge=4)
    max_disp: int = Field(default_factory=lambda: Config.SYNTH_MAX_DISP, ge=1)
    texture_radius: int = Field(default=2, ge=0)
    occluders: int = Field(default=2, ge=0)
    bg_disparity: Optional[int] = Field(default=None, ge=0)
    occluder_disparity: Optional[int] = Field(default=None, ge=1)
    textureless_bands: int = Field(default=0, ge=0)
    band_width: int = Field(default=MIN_BAND_WIDTH, ge=MIN_BAND_WIDTH)
    seed: int = 0

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthConfig":
        if self.max_disp >= self.cols:
            raise ValueError(f"max_disp {self.max_disp} must be smaller than cols {self.cols}")
        if self.bg_disparity is not None and self.bg_disparity > self.max_disp:
            raise ValueError("bg_disparity must not exceed max_disp")
        if self.occluder_disparity is not None:
            if self.occluder_disparity > self.max_disp:
                raise ValueError("occluder_disparity must not exceed max_disp")
            if self.bg_disparity is not None and self.occluder_disparity <= self.bg_disparity:
                raise ValueError("occluders must be closer (larger disparity) than the background")
        return self


def _texture(rng: np.random.Generator, rows: int, cols: int, radius: int) -> np.ndarray:
    """Box-blurred uniform noise stretched to integer intensities 0..255."""
    noise = rng.uniform(0.0, 1.0, size=(rows, cols))
    if radius:
        noise = uniform_filter(noise, size=2 * radius + 1, mode="reflect")
    low, high = noise.min(), noise.max()
    scaled = (noise - low) / (high - low) if high > low else np.zeros_like(noise)
    return np.round(scaled * 255.0).astype(np.float32)


def _flatten_bands(texture: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> None:
    cols = texture.shape[1]
    for _ in range(cfg.textureless_bands):
        if cfg.band_width >= cols:
            break
        start = int(rng.integers(0, cols - cfg.band_width + 1))
        band = texture[:, start : start + cfg.band_width]
        band[:] = np.round(band.mean())


def _draw_disparities(cfg: SynthConfig, rng: np.random.Generator) -> Tuple[int, List[int]]:
    bg = cfg.bg_disparity
    if bg is None:
        bg = int(rng.integers(1, max(2, cfg.max_disp // 2 + 1)))
    disparities = []
    for _ in range(cfg.occluders):
        if cfg.occluder_disparity is not None:
            disparities.append(cfg.occluder_disparity)
        elif bg < cfg.max_disp:
            disparities.append(int(rng.integers(bg + 1, cfg.max_disp + 1)))
    # paint far to near so nearer occluders cover farther ones
    return bg, sorted(disparities)


def synth_scene(cfg: SynthConfig, rng: np.random.Generator, frame: str) -> StereoSample:
    rows, cols = cfg.rows, cfg.cols
    bg, occluder_disps = _draw_disparities(cfg, rng)

    left = np.zeros((rows, cols), dtype=np.float32)
    right = np.zeros((rows, cols), dtype=np.float32)
    gt = np.full((rows, cols), float(bg), dtype=np.float32)
    left_layer = np.zeros((rows, cols), dtype=np.int64)
    right_layer = np.zeros((rows, cols), dtype=np.int64)

    # background plane: left(i, j) = B(i, j); right(i, j) = B(i, j + bg)
    background = _texture(rng, rows, cols + bg, cfg.texture_radius)
    _flatten_bands(background, cfg, rng)
    left[:] = background[:, :cols]
    right[:] = background[:, bg : bg + cols]

    for layer, disp in enumerate(occluder_disps, start=1):
        height = int(rng.integers(rows // 6 + 1, rows // 2 + 2))
        width = int(rng.integers(cols // 8 + 1, cols // 3 + 2))
        top = int(rng.integers(0, rows - height + 1))
        left_col = int(rng.integers(0, cols - width + 1))
        texture = _texture(rng, height, width, cfg.texture_radius)
        r_slice = slice(top, top + height)
        c_slice = slice(left_col, left_col + width)
        left[r_slice, c_slice] = texture
        gt[r_slice, c_slice] = disp
        left_layer[r_slice, c_slice] = layer

        # the same texture lands disp columns further left in the right view
        start = left_col - disp
        visible = slice(max(0, start), max(0, start + width))
        right[r_slice, visible] = texture[:, visible.start - start : visible.stop - start]
        right_layer[r_slice, visible] = layer

    columns = np.arange(cols)[None, :].repeat(rows, axis=0)
    partner = columns - gt.astype(np.int64)
    inside = partner >= 0
    owner = np.take_along_axis(right_layer, np.clip(partner, 0, cols - 1), axis=1)
    noc = inside & (owner == left_layer)

    return StereoSample(
        id=frame,
        left=left[None],
        right=right[None],
        gt=gt,
        gt_valid=np.ones((rows, cols), dtype=bool),
        noc=noc,
    )


def synth_generate(cfg: SynthConfig, rng: Optional[np.random.Generator] = None) -> List[StereoSample]:
    """
    Generate ``cfg.count`` scenes with dense ground truth.

    On non-occluded pixels left(i, j) == right(i, j - gt(i, j)) exactly.
    """
    rng = rng if rng is not None else stream(cfg.seed, "synth")
    samples = [synth_scene(cfg, rng, frame_name(index)) for index in range(cfg.count)]
    occluded = sum(int((~s.noc).sum()) for s in samples)
    logger.info(
        "generated %d synthetic %dx%d scenes (D=%d, %d occluded px)",
        len(samples),
        cfg.rows,
        cfg.cols,
        cfg.max_disp,
        occluded,
    )
    return samples
