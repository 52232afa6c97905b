"""Shared-weight siamese feature extractor."""

import logging
from typing import Dict, List, Optional, Union

import numpy as np

from app.config import Config
from stereo.errors import ConfigurationError, ShapeError
from stereo.siamese.arch import ArchSpec
from stereo.tensor import (
    RunningMoments,
    Tensor,
    batchnorm,
    conv2d,
    crop,
    deconv2,
    maxpool2,
    pad,
    relu,
)

logger = logging.getLogger(__name__)


class Layer:
    """One stage of the branch; owns its parameters."""

    name: str

    def parameters(self) -> Dict[str, Tensor]:
        return {}

    def tensors(self) -> List[Tensor]:
        """Every tensor the layer holds, trainable or not."""
        return list(self.parameters().values())

    def buffers(self) -> Dict[str, RunningMoments]:
        return {}

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        raise NotImplementedError

    def trace(self, mask: Tensor) -> Tensor:
        """Push a one-channel non-negative dependency mask through the layer's spatial operator."""
        raise NotImplementedError


class ConvBlock(Layer):
    """3x3 same-padded convolution, optionally followed by batch norm and ReLU."""

    def __init__(self, name: str, in_channels: int, out_channels: int, activated: bool, rng, init_std):
        self.name = name
        self.activated = activated
        fan_in = in_channels * 9
        std = init_std if init_std is not None else np.sqrt(2.0 / fan_in)
        self.weight = Tensor(
            rng.standard_normal((out_channels, in_channels, 3, 3)) * std,
            requires_grad=True,
            name=f"{name}.weight",
        )
        # batch norm cancels a conv bias, so activated blocks carry a fixed zero one
        self.bias = Tensor(np.zeros(out_channels), requires_grad=not activated, name=f"{name}.bias")
        if activated:
            self.gamma = Tensor(np.ones(out_channels), requires_grad=True, name=f"{name}.bn.gamma")
            self.beta = Tensor(np.zeros(out_channels), requires_grad=True, name=f"{name}.bn.beta")
            self.moments = RunningMoments(out_channels)

    def parameters(self) -> Dict[str, Tensor]:
        params = {self.weight.name: self.weight}
        if self.activated:
            params[self.gamma.name] = self.gamma
            params[self.beta.name] = self.beta
        else:
            params[self.bias.name] = self.bias
        return params

    def tensors(self) -> List[Tensor]:
        tensors = [self.weight, self.bias]
        if self.activated:
            tensors += [self.gamma, self.beta]
        return tensors

    def buffers(self) -> Dict[str, RunningMoments]:
        return {f"{self.name}.bn": self.moments} if self.activated else {}

    def _transform(self, x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
        return conv2d(x, weight, bias, stride=1, padding=1)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        out = self._transform(x, self.weight, self.bias)
        if self.activated:
            out = relu(batchnorm(out, self.gamma, self.beta, training=training, moments=self.moments))
        return out

    def trace(self, mask: Tensor) -> Tensor:
        # batch norm and ReLU keep the support of a non-negative mask
        kernel = Tensor(np.ones((1, 1) + self.weight.shape[2:]))
        return self._transform(mask, kernel, Tensor(np.zeros(1)))


class DeconvBlock(ConvBlock):
    """Stride-2 3x3 deconvolution that doubles the spatial size."""

    def __init__(self, name: str, channels: int, activated: bool, rng, init_std):
        super().__init__(name, channels, channels, activated, rng, init_std)
        # deconv weights are laid out (in, out, 3, 3); square here, so only the meaning changes

    def _transform(self, x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
        return deconv2(x, weight, bias)


class PoolLayer(Layer):
    def __init__(self, name: str):
        self.name = name

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return maxpool2(x)

    def trace(self, mask: Tensor) -> Tensor:
        return maxpool2(mask)


class SiameseNetwork:
    """
    Feature extractor applied to both images of a pair.

    There is a single parameter set: the left and right branches are the same
    object called twice, so weight sharing holds by construction.
    """

    def __init__(self, arch: ArchSpec, layers: List[Layer], seed: int):
        self.arch = arch
        self.layers = layers
        self.seed = seed

    def parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for layer in self.layers:
            params.update(layer.parameters())
        return params

    def buffers(self) -> Dict[str, RunningMoments]:
        moments: Dict[str, RunningMoments] = {}
        for layer in self.layers:
            moments.update(layer.buffers())
        return moments

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].tensors()[0].dtype

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.parameters().values())

    def astype(self, dtype) -> "SiameseNetwork":
        """Cast parameters and running moments in place (gradient checks use float64)."""
        for layer in self.layers:
            for tensor in layer.tensors():
                tensor.data = tensor.data.astype(dtype)
                tensor.zero_grad()
        for moments in self.buffers().values():
            if moments.initialized:
                moments.mean = moments.mean.astype(dtype)
                moments.var = moments.var.astype(dtype)
        return self

    def extract(self, image: Union[Tensor, np.ndarray], training: bool = False) -> Tensor:
        """
        Per-pixel ``theta``-dimensional features, same spatial size as ``image``.

        Images whose size is not a multiple of 2**pools are zero-padded on the
        bottom/right before the branch and the features cropped back after.
        """
        if not isinstance(image, Tensor):
            image = Tensor(np.asarray(image, dtype=self.dtype))
        if image.data.ndim != 4:
            raise ShapeError(f"expected an NCHW image, got shape {image.shape}")
        if image.shape[1] != self.arch.in_channels:
            raise ShapeError(
                f"network expects {self.arch.in_channels} input channels, got {image.shape[1]}",
                axis="channels",
            )
        multiple = self.arch.size_multiple
        rows, cols = image.shape[2], image.shape[3]
        for axis, size in (("rows", rows), ("cols", cols)):
            if size < multiple:
                raise ShapeError(
                    f"image size {size} is smaller than the {multiple} required by "
                    f"{self.arch.pool_count} pooling layers",
                    axis=axis,
                )

        bottom = (-rows) % multiple
        right = (-cols) % multiple
        x = pad(image, bottom, right) if bottom or right else image
        for layer in self.layers:
            x = layer(x, training)
        if bottom or right:
            x = crop(x, rows, cols)
        return x


def build(
    arch: ArchSpec,
    seed: int = 0,
    init_std: Optional[float] = None,
    patch_size: Optional[int] = None,
    dtype=np.float32,
) -> SiameseNetwork:
    """
    Allocate and initialize a branch for ``arch``.

    Weights are Gaussian with std sqrt(2 / fan_in) unless ``init_std`` (or
    STEREO_INIT_STD) overrides it. Identical seeds give identical parameters.
    """
    if init_std is None:
        init_std = Config.INIT_STD
    if patch_size is not None and arch.size_multiple > patch_size:
        raise ConfigurationError(
            f"{arch.pool_count} pooling layers need patches of at least {arch.size_multiple} px, "
            f"got {patch_size}"
        )

    rng = np.random.default_rng(seed)
    layers: List[Layer] = []
    schedule = arch.layer_schedule()
    final_kind, final_index = schedule[-1]
    last_conv = arch.conv_layers

    for kind, index in schedule:
        is_final = (kind, index) == (final_kind, final_index)
        if kind == "conv":
            in_channels = arch.in_channels if index == 1 else arch.theta
            activated = index != last_conv
            layers.append(ConvBlock(f"conv{index}", in_channels, arch.theta, activated, rng, init_std))
        elif kind == "pool":
            layers.append(PoolLayer(f"pool{index}"))
        else:
            layers.append(DeconvBlock(f"deconv{index}", arch.theta, not is_final, rng, init_std))

    network = SiameseNetwork(arch, layers, seed).astype(dtype)
    logger.debug(
        "built %s: %d layers, %d parameters", arch.name, len(layers), network.parameter_count()
    )
    return network
