"""Dataset ingestion, normalization, disparity PNGs and synthetic scenes."""

from stereo.data.disparity_png import (
    disparity_png_decode,
    disparity_png_encode,
    read_disparity,
    write_disparity,
)
from stereo.data.images import load_image, normalize, save_image
from stereo.data.kitti import LAYOUTS, disparity_histogram, frame_ids, load_kitti, load_sample, write_kitti
from stereo.data.samples import KITTI_SPLITS, DatasetSplit, StereoSample, make_split
from stereo.data.synthetic import SynthConfig, synth_generate

__all__ = [
    "KITTI_SPLITS",
    "LAYOUTS",
    "DatasetSplit",
    "StereoSample",
    "SynthConfig",
    "disparity_histogram",
    "disparity_png_decode",
    "disparity_png_encode",
    "frame_ids",
    "load_image",
    "load_kitti",
    "load_sample",
    "make_split",
    "normalize",
    "read_disparity",
    "save_image",
    "synth_generate",
    "write_disparity",
    "write_kitti",
]
