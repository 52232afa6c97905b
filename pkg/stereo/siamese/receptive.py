"""Empirical receptive field by tracing single-pixel dependency masks."""

import logging
from typing import Dict, List, Optional

import numpy as np

from app.config import ArchPreset
from stereo.siamese.arch import ArchSpec, preset, receptive_field
from stereo.siamese.network import SiameseNetwork, build
from stereo.tensor import Tensor

logger = logging.getLogger(__name__)


def _binarize(x: Tensor) -> Tensor:
    return Tensor((x.data > 0).astype(np.float64))


def dependency_receptive_field(
    arch: ArchSpec, width: Optional[int] = None, network: Optional[SiameseNetwork] = None
) -> int:
    """
    Measure the receptive field by marking one input pixel at a time.

    Every input column gets its own batch item with a single marked pixel; the
    marks are pushed through the layers of an instantiated branch (``network``,
    or one built from ``arch``) in their actual order, each layer applying its
    own spatial operator with all-ones kernels. For each output column the
    span of input columns that reach it is recorded; the widest span among
    columns whose dependencies stay clear of the borders is returned.
    """
    network = network if network is not None else build(arch)
    multiple = arch.size_multiple
    if width is None:
        width = 4 * receptive_field(arch) + 4 * multiple
    width += (-width) % multiple
    rows = multiple

    marks = np.zeros((width, 1, rows, width))
    marks[np.arange(width), 0, 0, np.arange(width)] = 1.0
    x = Tensor(marks)
    for layer in network.layers:
        x = _binarize(layer.trace(x))
        logger.debug("traced %s: %s", layer.name, x.shape)

    # reaches[x_in, x_out]: marking input column x_in touches output column x_out
    reaches = x.data[:, 0].max(axis=1) > 0
    widest = 0
    for out_col in range(width):
        sources = np.flatnonzero(reaches[:, out_col])
        if sources.size == 0 or sources[0] == 0 or sources[-1] == width - 1:
            continue
        widest = max(widest, int(sources[-1] - sources[0] + 1))
    return widest


def receptive_field_table(presets: List[ArchPreset] = None) -> List[Dict[str, int]]:
    """Analytic and traced receptive fields for each preset."""
    rows = []
    for name in presets or list(ArchPreset):
        arch = preset(name, theta=1, in_channels=1)
        rows.append(
            {
                "arch": arch.name,
                "conv_layers": arch.conv_layers,
                "pools": arch.pool_count,
                "analytic": receptive_field(arch),
                "traced": dependency_receptive_field(arch),
            }
        )
    return rows
