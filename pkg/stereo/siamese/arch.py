"""Architecture descriptions and receptive-field arithmetic for the siamese branches."""

import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import ArchPreset, Config

KERNEL_SIZE = 3


class ArchSpec(BaseModel):
    """
    Layer schedule of one siamese branch.

    ``pool_after`` lists 1-based conv block indices followed by a 2x2 max
    pool. One stride-2 deconvolution per pool is stacked after the last conv
    block. The final layer emits ``theta`` channels without batch norm/ReLU.
    """

    name: str = "custom"
    conv_layers: int = Field(ge=1)
    pool_after: List[int] = Field(default_factory=list)
    theta: int = Field(default=64, ge=1)
    in_channels: int = Field(default=1, ge=1)
    kernel_size: int = KERNEL_SIZE

    @field_validator("kernel_size")
    @classmethod
    def _fixed_kernel(cls, value: int) -> int:
        if value != KERNEL_SIZE:
            raise ValueError(f"kernel size is fixed at {KERNEL_SIZE}x{KERNEL_SIZE}")
        return value

    @model_validator(mode="after")
    def _check_pools(self) -> "ArchSpec":
        positions = self.pool_after
        if sorted(set(positions)) != positions:
            raise ValueError(f"pool positions must be strictly increasing, got {positions}")
        for position in positions:
            if not 1 <= position < self.conv_layers:
                raise ValueError(
                    f"pool position {position} must lie between conv blocks 1 and {self.conv_layers - 1}"
                )
        return self

    @property
    def pool_count(self) -> int:
        return len(self.pool_after)

    @property
    def size_multiple(self) -> int:
        """Spatial sizes must be multiples of this to pass every pool."""
        return 2 ** self.pool_count

    def layer_schedule(self) -> List[Tuple[str, int]]:
        """Ordered (kind, index) pairs: ("conv", i), ("pool", i), ("deconv", i)."""
        schedule: List[Tuple[str, int]] = []
        pool_index = 0
        for block in range(1, self.conv_layers + 1):
            schedule.append(("conv", block))
            if block in self.pool_after:
                pool_index += 1
                schedule.append(("pool", pool_index))
        for deconv in range(1, self.pool_count + 1):
            schedule.append(("deconv", deconv))
        return schedule


PRESET_LAYOUT = {
    ArchPreset.S4: (4, 1),
    ArchPreset.S7: (7, 2),
    ArchPreset.S9: (9, 3),
}


def preset(name: ArchPreset, theta: Optional[int] = None, in_channels: Optional[int] = None) -> ArchSpec:
    """S4/S7/S9 with pools after blocks 2, 4, 6 as far as the pool count goes."""
    name = ArchPreset(name)
    convs, pools = PRESET_LAYOUT[name]
    return ArchSpec(
        name=name.value,
        conv_layers=convs,
        pool_after=[2 * (i + 1) for i in range(pools)],
        theta=theta or Config.FEATURE_DIM,
        in_channels=in_channels or Config.in_channels(),
    )


def receptive_field(arch: ArchSpec) -> int:
    """
    Widest input span any single output feature depends on.

    Convs and pools follow rf += (k - 1) * jump; jump *= stride. The stacked
    stride-2 deconvolutions compose into one transposed kernel of stride
    2**P and width 2**(P + 1) - 1; each output then reads at most
    ceil(width / stride) adjacent coarse units.
    """
    rf, jump = 1, 1
    for kind, _ in arch.layer_schedule():
        if kind == "conv":
            rf += (arch.kernel_size - 1) * jump
        elif kind == "pool":
            rf += (2 - 1) * jump
            jump *= 2

    if arch.pool_count:
        stride = 2 ** arch.pool_count
        width = 1
        for level in range(arch.pool_count):
            width += (arch.kernel_size - 1) * 2 ** level
        rf += (math.ceil(width / stride) - 1) * jump
    return rf


def stacked_receptive_field(layers: int, kernel: int = KERNEL_SIZE) -> int:
    """Pool-free stack of ``layers`` convolutions: n * (w - 1) + 1."""
    return layers * (kernel - 1) + 1
