"""Full-image inference and bad-pixel evaluation."""

from stereo.inference.evaluator import EvaluationResult, evaluate
from stereo.inference.metrics import (
    ALL,
    NON_OCC,
    THRESHOLDS,
    MetricsReport,
    error_counts,
    image_records,
    pixel_error,
)
from stereo.inference.predictor import (
    DisparityPrediction,
    argmax_disparity,
    infer,
    read_volume,
    write_volume,
)

__all__ = [
    "ALL",
    "NON_OCC",
    "THRESHOLDS",
    "DisparityPrediction",
    "EvaluationResult",
    "MetricsReport",
    "argmax_disparity",
    "error_counts",
    "evaluate",
    "image_records",
    "infer",
    "pixel_error",
    "read_volume",
    "write_volume",
]
