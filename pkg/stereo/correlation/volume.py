"""Cost volumes: inner-product correlation and the Psi feature space."""

import logging
from typing import Optional, Tuple

import numpy as np

from stereo.errors import ShapeError
from stereo.tensor import Function, OpKind, Tensor

logger = logging.getLogger(__name__)


def sentinel(dtype) -> float:
    """Score written for disparities that leave the image; never wins an argmax."""
    return float(np.finfo(dtype).min)


def check_pair(left_shape, right_shape, max_disp: int, offset: int = 0) -> None:
    if len(left_shape) != 4 or len(right_shape) != 4:
        raise ShapeError(f"feature maps must be rank-4, got {left_shape} and {right_shape}")
    if left_shape[:3] != right_shape[:3]:
        raise ShapeError(f"left {left_shape} and right {right_shape} feature maps differ")
    if right_shape[3] != left_shape[3] + offset:
        raise ShapeError(
            f"right features must be {left_shape[3] + offset} wide for offset {offset}, "
            f"got {right_shape[3]}",
            axis="cols",
        )
    if max_disp < 1:
        raise ShapeError(f"max disparity must be >= 1, got {max_disp}", axis="disparity")
    if offset == 0 and max_disp >= left_shape[3]:
        raise ShapeError(
            f"max disparity {max_disp} must be smaller than the {left_shape[3]} image columns",
            axis="cols",
        )


def disparity_mask(
    batch: int, cols: int, max_disp: int, first_col: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    (batch, cols, D+1) mask of disparities whose right pixel is inside the image.

    ``first_col`` gives, per batch item, the absolute image column of feature
    column 0 (patches cut from the middle of an image); zero by default.
    """
    if first_col is None:
        first_col = np.zeros(batch, dtype=np.int64)
    first_col = np.asarray(first_col, dtype=np.int64).reshape(batch, 1, 1)
    columns = np.arange(cols)[None, :, None]
    disparities = np.arange(max_disp + 1)[None, None, :]
    return first_col + columns - disparities >= 0


def _spans(cols: int, right_cols: int, offset: int, d: int) -> Tuple[int, int]:
    """Left columns [lo, hi) whose right partner j + offset - d lies in [0, right_cols)."""
    shift = offset - d
    lo = max(0, -shift)
    hi = min(cols, right_cols - shift)
    return lo, max(lo, hi)


class InnerProductVolume(Function):
    """score(n, i, j, d) = sum_c left(n, c, i, j) * right(n, c, i, j + offset - d)."""

    kind = OpKind.CORRELATION

    def forward(self, left, right, max_disp, offset=0, valid=None):
        check_pair(left.shape, right.shape, max_disp, offset)
        n, theta, rows, cols = left.shape
        if valid is None:
            valid = disparity_mask(n, cols, max_disp)
        lhs = np.ascontiguousarray(left.transpose(0, 2, 3, 1))
        rhs = np.ascontiguousarray(right.transpose(0, 2, 3, 1))

        scores = np.full((n, rows, cols, max_disp + 1), sentinel(left.dtype), dtype=left.dtype)
        keep = np.zeros((n, 1, cols, max_disp + 1), dtype=bool)
        for d in range(max_disp + 1):
            lo, hi = _spans(cols, rhs.shape[2], offset, d)
            keep[:, 0, lo:hi, d] = valid[:, lo:hi, d]
            if lo == hi:
                continue
            a = lhs[:, :, lo:hi]
            b = rhs[:, :, lo + offset - d : hi + offset - d]
            # channel-by-channel accumulation keeps the summation order fixed
            acc = a[..., 0] * b[..., 0]
            for c in range(1, theta):
                acc += a[..., c] * b[..., c]
            scores[:, :, lo:hi, d] = acc
        scores = np.where(keep, scores, sentinel(left.dtype)).astype(left.dtype, copy=False)
        self.saved.update(lhs=lhs, rhs=rhs, keep=keep, offset=offset, max_disp=max_disp)
        return scores

    def backward(self, grad):
        lhs, rhs, keep = self.saved["lhs"], self.saved["rhs"], self.saved["keep"]
        offset = self.saved["offset"]
        grad = np.where(keep, grad, 0)
        grad_l = np.zeros_like(lhs)
        grad_r = np.zeros_like(rhs)
        cols = lhs.shape[2]
        for d in range(self.saved["max_disp"] + 1):
            lo, hi = _spans(cols, rhs.shape[2], offset, d)
            if lo == hi:
                continue
            g = grad[:, :, lo:hi, d, None]
            grad_l[:, :, lo:hi] += g * rhs[:, :, lo + offset - d : hi + offset - d]
            grad_r[:, :, lo + offset - d : hi + offset - d] += g * lhs[:, :, lo:hi]
        return (
            np.ascontiguousarray(grad_l.transpose(0, 3, 1, 2)),
            np.ascontiguousarray(grad_r.transpose(0, 3, 1, 2)),
        )


class BuildPsi(Function):
    """
    Concatenate left features with every disparity-shifted right feature.

    Output is (batch * rows * cols, D+1, 2 * theta); pixel p = (n * rows + i) * cols + j.
    Channels [0, theta) repeat the left feature, channels [theta, 2 * theta)
    hold the right feature at column j + offset - d, or zeros when that
    partner is outside the image.
    """

    kind = OpKind.CONCAT

    def forward(self, left, right, max_disp, offset=0, valid=None):
        check_pair(left.shape, right.shape, max_disp, offset)
        n, theta, rows, cols = left.shape
        if valid is None:
            valid = disparity_mask(n, cols, max_disp)
        lhs = left.transpose(0, 2, 3, 1)
        rhs = right.transpose(0, 2, 3, 1)

        psi = np.zeros((n, rows, cols, max_disp + 1, 2 * theta), dtype=left.dtype)
        psi[..., :theta] = lhs[:, :, :, None, :]
        keep = np.zeros((n, 1, cols, max_disp + 1), dtype=bool)
        for d in range(max_disp + 1):
            lo, hi = _spans(cols, rhs.shape[2], offset, d)
            keep[:, 0, lo:hi, d] = valid[:, lo:hi, d]
            psi[:, :, lo:hi, d, theta:] = rhs[:, :, lo + offset - d : hi + offset - d]
        psi[..., theta:] = np.where(keep[..., None], psi[..., theta:], 0)
        self.saved.update(keep=keep, offset=offset, max_disp=max_disp, theta=theta)
        return psi.reshape(n * rows * cols, max_disp + 1, 2 * theta)

    def backward(self, grad):
        n, theta, rows, cols = self.input_shapes[0]
        right_cols = self.input_shapes[1][3]
        offset, keep = self.saved["offset"], self.saved["keep"]
        grad = grad.reshape(n, rows, cols, -1, 2 * theta)
        grad_l = grad[..., :theta].sum(axis=3)
        grad_shift = np.where(keep[..., None], grad[..., theta:], 0)
        grad_r = np.zeros((n, rows, right_cols, theta), dtype=grad.dtype)
        for d in range(self.saved["max_disp"] + 1):
            lo, hi = _spans(cols, right_cols, offset, d)
            grad_r[:, :, lo + offset - d : hi + offset - d] += grad_shift[:, :, lo:hi, d]
        return (
            np.ascontiguousarray(grad_l.transpose(0, 3, 1, 2)),
            np.ascontiguousarray(grad_r.transpose(0, 3, 1, 2)),
        )


def inner_product_volume(
    left: Tensor,
    right: Tensor,
    max_disp: int,
    offset: int = 0,
    valid: Optional[np.ndarray] = None,
) -> Tensor:
    """(batch, rows, cols, D+1) dot-product scores; out-of-image entries hold ``sentinel``."""
    return InnerProductVolume.apply(left, right, max_disp=max_disp, offset=offset, valid=valid)


def build_psi(
    left: Tensor,
    right: Tensor,
    max_disp: int,
    offset: int = 0,
    valid: Optional[np.ndarray] = None,
) -> Tensor:
    return BuildPsi.apply(left, right, max_disp=max_disp, offset=offset, valid=valid)
