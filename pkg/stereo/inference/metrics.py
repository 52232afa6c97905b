"""KITTI-style bad-pixel error rates."""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from stereo.errors import NoGroundTruthError, ShapeError

logger = logging.getLogger(__name__)

THRESHOLDS: Tuple[int, ...] = (2, 3, 5)
NON_OCC = "Non-Occ"
ALL = "All"
SUBSETS = (NON_OCC, ALL)
AGGREGATE = "ALL"
RECORD_COLUMNS = ["image", "threshold", "subset", "error_pct", "px_count"]


def error_counts(
    pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, threshold: float
) -> Tuple[int, int]:
    """(pixels off by more than ``threshold``, pixels evaluated) inside ``mask``."""
    pred, gt, mask = np.asarray(pred), np.asarray(gt), np.asarray(mask, dtype=bool)
    if pred.shape != gt.shape or gt.shape != mask.shape:
        raise ShapeError(f"prediction {pred.shape}, ground truth {gt.shape} and mask {mask.shape} differ")
    total = int(mask.sum())
    bad = int((np.abs(pred.astype(np.float64) - gt.astype(np.float64)) > threshold)[mask].sum())
    return bad, total


def pixel_error(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, threshold: float) -> float:
    """Percentage of ``mask`` pixels whose prediction misses the ground truth by more than ``threshold``."""
    bad, total = error_counts(pred, gt, mask, threshold)
    if total == 0:
        raise NoGroundTruthError("no ground-truth pixels to evaluate")
    return 100.0 * bad / total


def image_records(
    image: str,
    pred: np.ndarray,
    gt: np.ndarray,
    gt_valid: np.ndarray,
    noc: Optional[np.ndarray] = None,
    thresholds: Sequence[float] = THRESHOLDS,
) -> List[dict]:
    """
    One record per threshold and subset.

    "All" covers every valid ground-truth pixel; "Non-Occ" only those also
    visible in the right view. An empty subset yields NaN with px_count 0.
    """
    noc = gt_valid if noc is None else (np.asarray(noc, dtype=bool) & gt_valid)
    records = []
    for threshold in thresholds:
        for subset, mask in ((NON_OCC, noc), (ALL, gt_valid)):
            bad, total = error_counts(pred, gt, mask, threshold)
            records.append(
                {
                    "image": image,
                    "threshold": threshold,
                    "subset": subset,
                    "error_pct": 100.0 * bad / total if total else float("nan"),
                    "px_count": total,
                    "bad_count": bad,
                }
            )
    return records


class MetricsReport:
    """Per-image records plus the pixel-weighted aggregate, laid out like a results table."""

    def __init__(self, records: Iterable[dict], missing: Optional[List[str]] = None):
        frame = pd.DataFrame(list(records), columns=RECORD_COLUMNS + ["bad_count"])
        self.per_image = frame
        self.missing = list(missing or [])
        self.records = pd.concat([frame, self._aggregate(frame)], ignore_index=True)

    @staticmethod
    def _aggregate(frame: pd.DataFrame) -> pd.DataFrame:
        if frame.empty:
            return frame.iloc[0:0]
        grouped = frame.groupby(["threshold", "subset"], sort=False)[["bad_count", "px_count"]].sum().reset_index()
        grouped["image"] = AGGREGATE
        grouped["error_pct"] = np.where(
            grouped["px_count"] > 0,
            100.0 * grouped["bad_count"] / grouped["px_count"].where(grouped["px_count"] > 0, 1),
            np.nan,
        )
        return grouped[RECORD_COLUMNS + ["bad_count"]]

    def error(self, image: str, threshold: float, subset: str) -> float:
        row = self.records[
            (self.records["image"] == image)
            & (self.records["threshold"] == threshold)
            & (self.records["subset"] == subset)
        ]
        if row.empty:
            raise KeyError((image, threshold, subset))
        return float(row["error_pct"].iloc[0])

    def table(self) -> pd.DataFrame:
        """Rows = images then ALL; columns = (threshold, subset)."""
        if self.per_image.empty:
            return pd.DataFrame()
        table = self.records.pivot_table(
            index="image", columns=["threshold", "subset"], values="error_pct", sort=False, dropna=False
        )
        order = [name for name in table.index if name != AGGREGATE] + [AGGREGATE]
        return table.reindex(order)

    def to_text(self) -> str:
        table = self.table()
        table.columns = [f">{threshold:g}px {subset}" for threshold, subset in table.columns]
        table.index.name = None
        return table.to_string(float_format=lambda v: f"{v:6.2f}", na_rep="   n/a")

    def write(self, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
        """Write ``metrics.csv`` records and the ``metrics.txt`` table."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records_path = out_dir / "metrics.csv"
        table_path = out_dir / "metrics.txt"
        self.records[RECORD_COLUMNS].to_csv(records_path, index=False, float_format="%.4f")
        table_path.write_text(self.to_text() + "\n")
        return records_path, table_path
