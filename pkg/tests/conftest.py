"""Shared helpers for the stereo test suites."""

import numpy as np
import pytest

from app.config import ArchPreset, CorrelationMode
from stereo.correlation import build_model
from stereo.siamese import preset
from stereo.tensor import Tensor


def warm_up(model, rows=16, cols=24, seed=0):
    """Populate batch-norm running moments with one training-mode pass."""
    rng = np.random.default_rng(seed)
    image = Tensor(rng.standard_normal((2, model.arch.in_channels, rows, cols)).astype(model.dtype))
    model.network.extract(image, training=True)
    return model


@pytest.fixture
def make_model():
    """Factory for small warmed-up matchers in double precision."""

    def factory(arch=ArchPreset.S4, mode=CorrelationMode.INNER, max_disp=4, theta=4, seed=0, head_kernel=3):
        spec = preset(arch, theta=theta, in_channels=1)
        model = build_model(spec, mode, max_disp, seed=seed, head_kernel=head_kernel, dtype=np.float64)
        return warm_up(model, seed=seed)

    return factory
