"""Training configuration and the per-preset defaults."""

from typing import Dict, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from app.config import ArchPreset, Config, CorrelationMode
from stereo.siamese import ArchSpec, preset

# preset -> (patch size, {correlation mode: batch size})
PRESET_DEFAULTS: Dict[ArchPreset, Tuple[int, Dict[CorrelationMode, int]]] = {
    ArchPreset.S4: (10, {CorrelationMode.INNER: 128, CorrelationMode.LEARNED: 128}),
    ArchPreset.S7: (28, {CorrelationMode.INNER: 32, CorrelationMode.LEARNED: 20}),
    ArchPreset.S9: (56, {CorrelationMode.INNER: 20, CorrelationMode.LEARNED: 8}),
}

DEFAULT_ITERATIONS = 75000
DEFAULT_LR = 1e-3
LR_DECAY_AT = 0.8
LR_DECAY_FACTOR = 0.1


class TrainConfig(BaseModel):
    """Resolved training run settings; unset patch and batch sizes come from the preset table."""

    arch: ArchPreset = ArchPreset.S4
    correlation: CorrelationMode = CorrelationMode.INNER
    max_disp: int = Field(default_factory=lambda: Config.KITTI_MAX_DISP, ge=1)
    patch_size: Optional[int] = Field(default=None, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=1)
    iterations: int = Field(default=DEFAULT_ITERATIONS, ge=0)
    lr: float = Field(default=DEFAULT_LR, ge=0.0)
    lr_decay: bool = False
    seed: int = Field(default_factory=lambda: Config.SEED)
    theta: int = Field(default_factory=lambda: Config.FEATURE_DIM, ge=1)
    in_channels: int = Field(default_factory=Config.in_channels, ge=1)
    head_kernel: int = 3
    log_every: int = Field(default_factory=lambda: Config.LOG_EVERY, ge=1)
    max_patch_retries: int = Field(default_factory=lambda: Config.MAX_PATCH_RETRIES, ge=1)

    @model_validator(mode="after")
    def _fill_preset_defaults(self) -> "TrainConfig":
        patch, batches = PRESET_DEFAULTS[self.arch]
        if self.patch_size is None:
            self.patch_size = patch
        if self.batch_size is None:
            self.batch_size = batches[self.correlation]
        multiple = self.arch_spec().size_multiple
        if self.patch_size % multiple:
            raise ValueError(
                f"patch size {self.patch_size} must be divisible by {multiple} for {self.arch.value}"
            )
        if self.head_kernel not in (1, 3):
            raise ValueError(f"head_kernel must be 1 or 3, got {self.head_kernel}")
        return self

    def arch_spec(self) -> ArchSpec:
        return preset(self.arch, theta=self.theta, in_channels=self.in_channels)

    def lr_at(self, iteration: int) -> float:
        """Learning rate for a 1-based iteration."""
        if self.lr_decay and iteration > int(LR_DECAY_AT * self.iterations):
            return self.lr * LR_DECAY_FACTOR
        return self.lr
