"""Siamese branch plus correlation stage: the full matcher."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.config import Config, CorrelationMode
from stereo.correlation.head import CorrHead, learned_scores
from stereo.correlation.volume import build_psi, check_pair, disparity_mask, inner_product_volume
from stereo.errors import ConfigurationError
from stereo.siamese import ArchSpec, Checkpoint, SiameseNetwork, build
from stereo.tensor import Tensor

logger = logging.getLogger(__name__)


class StereoModel:
    """
    Feature extractor shared by both views and a correlation stage.

    ``mode`` selects the inner-product volume (no extra parameters) or the
    learned head over Psi.
    """

    def __init__(
        self,
        network: SiameseNetwork,
        mode: CorrelationMode,
        max_disp: int,
        head: Optional[CorrHead] = None,
    ):
        self.network = network
        self.mode = CorrelationMode(mode)
        self.max_disp = max_disp
        if self.mode == CorrelationMode.LEARNED and head is None:
            raise ConfigurationError("learned correlation needs a head")
        self.head = head if self.mode == CorrelationMode.LEARNED else None

    @property
    def arch(self) -> ArchSpec:
        return self.network.arch

    @property
    def dtype(self) -> np.dtype:
        return self.network.dtype

    def parameters(self) -> Dict[str, Tensor]:
        params = self.network.parameters()
        if self.head is not None:
            params.update(self.head.parameters())
        return params

    def astype(self, dtype) -> "StereoModel":
        self.network.astype(dtype)
        if self.head is not None:
            self.head.astype(dtype)
        return self

    def features(self, left, right, training: bool = False) -> Tuple[Tensor, Tensor]:
        """Run the same branch on both views."""
        return (
            self.network.extract(left, training=training),
            self.network.extract(right, training=training),
        )

    def scores(
        self,
        left_features: Tensor,
        right_features: Tensor,
        max_disp: Optional[int] = None,
        offset: int = 0,
        first_col: Optional[np.ndarray] = None,
    ) -> Tensor:
        """
        Cost volume (batch, rows, cols, D+1) for feature maps.

        ``offset`` is how many extra columns the right features carry on their
        left (training patches use D); ``first_col`` the absolute image column
        of the left features' first column, used to zero out-of-image partners.
        """
        max_disp = max_disp or self.max_disp
        batch, _, rows, cols = left_features.shape
        valid = disparity_mask(batch, cols, max_disp, first_col)
        if self.mode == CorrelationMode.INNER:
            return inner_product_volume(left_features, right_features, max_disp, offset, valid)
        psi = build_psi(left_features, right_features, max_disp, offset, valid)
        return learned_scores(psi, self.head, (batch, rows, cols))

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            network=self.network,
            correlation=self.mode,
            max_disp=self.max_disp,
            head_kernel=self.head.kernel if self.head is not None else 3,
            head=self.head.state() if self.head is not None else {},
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "StereoModel":
        head = None
        if checkpoint.correlation == CorrelationMode.LEARNED:
            head = CorrHead(
                checkpoint.network.arch.theta,
                kernel=checkpoint.head_kernel,
                dtype=checkpoint.network.dtype,
            ).load_state(checkpoint.head)
        return cls(checkpoint.network, checkpoint.correlation, checkpoint.max_disp, head)


def build_model(
    arch: ArchSpec,
    mode: CorrelationMode,
    max_disp: int,
    seed: int = 0,
    head_kernel: int = 3,
    patch_size: Optional[int] = None,
    dtype=np.float32,
) -> StereoModel:
    network = build(arch, seed=seed, patch_size=patch_size, dtype=dtype)
    head = None
    if CorrelationMode(mode) == CorrelationMode.LEARNED:
        head = CorrHead(arch.theta, kernel=head_kernel, seed=seed + 1, init_std=Config.INIT_STD, dtype=dtype)
    return StereoModel(network, mode, max_disp, head)


def _bands(rows: int, band_rows: int) -> List[Tuple[int, int]]:
    return [(start, min(start + band_rows, rows)) for start in range(0, rows, band_rows)]


def score_volume(
    model: StereoModel,
    left_features: Tensor,
    right_features: Tensor,
    max_disp: Optional[int] = None,
    band_rows: Optional[int] = None,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    Full-image cost volume (rows, cols, D+1) evaluated in row bands.

    Features are computed once by the caller; only the per-band Psi is
    transient. Rows are independent, so the result does not depend on
    ``band_rows`` or ``threads``.
    """
    max_disp = max_disp or model.max_disp
    band_rows = band_rows or Config.BAND_ROWS
    threads = threads or Config.THREADS
    if band_rows < 1 or threads < 1:
        raise ConfigurationError("band rows and threads must be >= 1")
    left = np.asarray(left_features.data if isinstance(left_features, Tensor) else left_features)
    right = np.asarray(right_features.data if isinstance(right_features, Tensor) else right_features)
    if left.shape[0] != 1:
        raise ConfigurationError(f"score_volume takes one image pair, got a batch of {left.shape[0]}")
    check_pair(left.shape, right.shape, max_disp)
    rows = left.shape[2]

    def evaluate(band: Tuple[int, int]) -> np.ndarray:
        start, stop = band
        volume = model.scores(
            Tensor(left[:, :, start:stop]), Tensor(right[:, :, start:stop]), max_disp=max_disp
        )
        return volume.data[0]

    bands = _bands(rows, band_rows)
    logger.debug("scoring %d bands of %d rows on %d threads", len(bands), band_rows, threads)
    if threads == 1:
        parts = [evaluate(band) for band in bands]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(evaluate, bands))
    return np.concatenate(parts, axis=0)


def rebuild_scores_variable_D(
    model: StereoModel, left_features: Tensor, right_features: Tensor, max_disp: int
) -> np.ndarray:
    """
    Re-evaluate a trained model's volume for a different maximum disparity.

    The head's kernels only span neighbouring disparities, so no retraining is
    needed; interior disparities agree with the original range.
    """
    return score_volume(model, left_features, right_features, max_disp=max_disp, band_rows=None)
