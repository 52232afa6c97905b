"""Configuration management for the stereo matching toolkit."""

import os
from enum import Enum
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

ENV_PREFIX = "STEREO_"


def _env(name: str, default: Optional[str] = None) -> Optional[str]:
    return os.getenv(ENV_PREFIX + name, default)


class ArchPreset(str, Enum):
    """Siamese feature-extractor presets."""
    S4 = "s4"
    S7 = "s7"
    S9 = "s9"


class CorrelationMode(str, Enum):
    """How left/right features are turned into disparity scores."""
    INNER = "inner"
    LEARNED = "learned"


class KittiEdition(str, Enum):
    """Supported KITTI stereo benchmark editions."""
    KITTI2012 = "2012"
    KITTI2015 = "2015"


class ColorMode(str, Enum):
    """Input channels fed to the first convolution."""
    GRAY = "gray"
    RGB = "rgb"


class Config:
    """Application configuration."""

    # Reproducibility
    SEED: int = int(_env("SEED", "0"))
    THREADS: int = int(_env("THREADS", "1"))

    # Data settings
    DATA_DIR: str = _env("DATA_DIR", ".data/kitti")
    OUTPUT_DIR: str = _env("OUTPUT_DIR", ".data/runs")
    COLOR_MODE: ColorMode = ColorMode(_env("COLOR_MODE", "gray"))
    KITTI_MAX_DISP: int = int(_env("KITTI_MAX_DISP", "256"))
    SYNTH_MAX_DISP: int = int(_env("SYNTH_MAX_DISP", "16"))

    # Network settings
    FEATURE_DIM: int = int(_env("FEATURE_DIM", "64"))
    INIT_STD: Optional[float] = float(_env("INIT_STD")) if _env("INIT_STD") else None

    # Inference settings
    BAND_ROWS: int = int(_env("BAND_ROWS", "8"))

    # Training settings
    LOG_EVERY: int = int(_env("LOG_EVERY", "50"))
    MAX_PATCH_RETRIES: int = int(_env("MAX_PATCH_RETRIES", "20"))

    # Verification settings
    GRADCHECK_TOLERANCE: float = float(_env("GRADCHECK_TOLERANCE", "1e-4"))
    GRADCHECK_ATOL: float = float(_env("GRADCHECK_ATOL", "1e-8"))
    GRADCHECK_SEEDS: int = int(_env("GRADCHECK_SEEDS", "20"))

    # Application settings
    LOG_LEVEL: str = _env("LOG_LEVEL", "INFO")

    @classmethod
    def validate(cls) -> None:
        """Validate configuration values that have hard bounds."""
        if cls.THREADS < 1:
            raise ValueError("STEREO_THREADS must be >= 1")
        if cls.BAND_ROWS < 1:
            raise ValueError("STEREO_BAND_ROWS must be >= 1")
        if cls.FEATURE_DIM < 1:
            raise ValueError("STEREO_FEATURE_DIM must be >= 1")
        if cls.INIT_STD is not None and cls.INIT_STD <= 0:
            raise ValueError("STEREO_INIT_STD must be positive when set")
        if cls.MAX_PATCH_RETRIES < 1:
            raise ValueError("STEREO_MAX_PATCH_RETRIES must be >= 1")
        if cls.GRADCHECK_SEEDS < 1:
            raise ValueError("STEREO_GRADCHECK_SEEDS must be >= 1")
        if cls.GRADCHECK_ATOL < 0:
            raise ValueError("STEREO_GRADCHECK_ATOL must be >= 0")

    @classmethod
    def in_channels(cls) -> int:
        """Channel count of normalized input images."""
        return 3 if cls.COLOR_MODE == ColorMode.RGB else 1
