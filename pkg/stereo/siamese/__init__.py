"""Siamese feature extractors."""

from stereo.siamese.arch import (
    PRESET_LAYOUT,
    ArchSpec,
    preset,
    receptive_field,
    stacked_receptive_field,
)
from stereo.siamese.checkpoint import Checkpoint, dumps, load, loads, save
from stereo.siamese.network import SiameseNetwork, build
from stereo.siamese.receptive import dependency_receptive_field, receptive_field_table

__all__ = [
    "PRESET_LAYOUT",
    "ArchSpec",
    "Checkpoint",
    "SiameseNetwork",
    "build",
    "dumps",
    "dependency_receptive_field",
    "load",
    "loads",
    "preset",
    "receptive_field",
    "receptive_field_table",
    "save",
    "stacked_receptive_field",
]
