"""Directory-level evaluation of disparity PNGs against KITTI ground truth."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

from app.config import Config
from stereo.data.disparity_png import read_disparity
from stereo.errors import NoGroundTruthError, ShapeError
from stereo.inference.metrics import ALL, THRESHOLDS, MetricsReport, image_records

logger = logging.getLogger(__name__)


@dataclass
class EvaluationResult:
    report: MetricsReport
    missing: List[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missing


def _names(directory: Path) -> List[str]:
    return sorted(p.name for p in directory.glob("*.png"))


def evaluate(
    pred_dir: Union[str, Path],
    gt_dir: Union[str, Path],
    noc_dir: Optional[Union[str, Path]] = None,
    thresholds: Sequence[float] = THRESHOLDS,
    threads: Optional[int] = None,
) -> EvaluationResult:
    """
    Score every prediction that has a same-named ground-truth file.

    Names present on only one side are reported in ``missing`` and left out
    of the metrics. With ``noc_dir`` every scored image needs its occlusion
    mask; images without one are treated the same way. Without ``noc_dir``
    the Non-Occ subset equals All.
    Prediction pixels stored as 0 count as disparity 0.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds, gts = set(_names(pred_dir)), set(_names(gt_dir))
    paired = sorted(preds & gts)
    missing = sorted(preds ^ gts)
    for name in missing:
        side = "ground truth" if name in preds else "prediction"
        logger.warning("no %s for %s; excluded", side, name)
    if noc_dir is not None:
        masks = set(_names(Path(noc_dir)))
        unmasked = [name for name in paired if name not in masks]
        for name in unmasked:
            logger.warning("no occlusion mask for %s; excluded", name)
        paired = [name for name in paired if name in masks]
        missing = sorted(set(missing) | set(unmasked))

    def score(name: str) -> List[dict]:
        pred, _ = read_disparity(pred_dir / name)
        gt, gt_valid = read_disparity(gt_dir / name)
        noc = None
        if noc_dir is not None:
            _, noc = read_disparity(Path(noc_dir) / name)
        if pred.shape != gt.shape:
            raise ShapeError(f"{name}: prediction {pred.shape} and ground truth {gt.shape} differ")
        return image_records(Path(name).stem, pred, gt, gt_valid, noc, thresholds)

    threads = threads or Config.THREADS
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(score, paired))
    else:
        per_image = [score(name) for name in paired]

    records = [record for image in per_image for record in image]
    if paired and not any(record["px_count"] for record in records if record["subset"] == ALL):
        raise NoGroundTruthError(f"no valid ground-truth pixels in {len(paired)} paired images")
    logger.info("evaluated %d images (%d missing pairs)", len(paired), len(missing))
    return EvaluationResult(report=MetricsReport(records, missing), missing=missing)
