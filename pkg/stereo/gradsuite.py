"""Named finite-difference checks for every differentiable op and composed model."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.config import ArchPreset, Config, CorrelationMode
from stereo.correlation import (
    CorrHead,
    build_model,
    build_psi,
    disparity_mask,
    inner_product_volume,
    learned_scores,
)
from stereo.errors import ConfigurationError
from stereo.rng import stream
from stereo.siamese import preset
from stereo.tensor import (
    Tensor,
    batchnorm,
    conv2d,
    crop,
    cross_entropy,
    deconv2,
    gradcheck,
    max_relative_error,
    maxpool2,
    pad,
    relu,
    reshape,
)
from stereo.training.loss import patch_loss
from stereo.training.sampler import PatchExample

logger = logging.getLogger(__name__)

EPSILON = 1e-5
MODEL_THETA = 4
MODEL_MAX_DISP = 3


@dataclass
class CheckResult:
    name: str
    errors: Dict[str, float]
    tolerance: float
    seeds: int = 1
    worst_draw: int = 0

    @property
    def worst(self) -> float:
        return max_relative_error(self.errors)

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance


def _leaf(rng: np.random.Generator, shape, name: str, away_from_zero: bool = False) -> Tensor:
    data = rng.standard_normal(shape)
    if away_from_zero:
        data = np.sign(data) * (0.1 + np.abs(data))
    return Tensor(data, requires_grad=True, name=name)


def _size(rng: np.random.Generator, low: int, high: int) -> int:
    return int(rng.integers(low, high + 1))


def _check_conv2d(rng):
    n, c_in, c_out = _size(rng, 1, 2), _size(rng, 1, 3), _size(rng, 1, 4)
    leaves = {
        "x": _leaf(rng, (n, c_in, _size(rng, 3, 6), _size(rng, 3, 6)), "x"),
        "weight": _leaf(rng, (c_out, c_in, 3, 3), "weight"),
        "bias": _leaf(rng, (c_out,), "bias"),
    }
    return leaves, lambda: conv2d(leaves["x"], leaves["weight"], leaves["bias"], stride=1, padding=1)


def _check_conv2d_strided(rng):
    n, c_in, c_out = _size(rng, 1, 2), _size(rng, 1, 3), _size(rng, 1, 3)
    leaves = {
        "x": _leaf(rng, (n, c_in, 2 * _size(rng, 2, 3), 2 * _size(rng, 2, 3)), "x"),
        "weight": _leaf(rng, (c_out, c_in, 3, 3), "weight"),
        "bias": _leaf(rng, (c_out,), "bias"),
    }
    return leaves, lambda: conv2d(leaves["x"], leaves["weight"], leaves["bias"], stride=2, padding=1)


def _check_maxpool2(rng):
    shape = (_size(rng, 1, 2), _size(rng, 1, 3), 2 * _size(rng, 1, 3), 2 * _size(rng, 1, 3))
    # distinct values 0.01 apart so no perturbation changes a window maximum
    x = rng.permutation(int(np.prod(shape))).reshape(shape) * 0.01
    leaves = {"x": Tensor(x.astype(np.float64), requires_grad=True, name="x")}
    return leaves, lambda: maxpool2(leaves["x"])


def _check_deconv2(rng):
    c_in, c_out = _size(rng, 1, 3), _size(rng, 1, 3)
    leaves = {
        "y": _leaf(rng, (_size(rng, 1, 2), c_in, _size(rng, 2, 4), _size(rng, 2, 4)), "y"),
        "weight": _leaf(rng, (c_in, c_out, 3, 3), "weight"),
        "bias": _leaf(rng, (c_out,), "bias"),
    }
    return leaves, lambda: deconv2(leaves["y"], leaves["weight"], leaves["bias"])


def _check_batchnorm(rng):
    channels = _size(rng, 1, 3)
    leaves = {
        "x": _leaf(rng, (_size(rng, 2, 3), channels, _size(rng, 2, 4), _size(rng, 2, 4)), "x"),
        "gamma": _leaf(rng, (channels,), "gamma"),
        "beta": _leaf(rng, (channels,), "beta"),
    }
    return leaves, lambda: batchnorm(leaves["x"], leaves["gamma"], leaves["beta"], training=True)


def _check_relu(rng):
    shape = (_size(rng, 1, 2), _size(rng, 1, 3), _size(rng, 2, 4), _size(rng, 2, 4))
    leaves = {"x": _leaf(rng, shape, "x", away_from_zero=True)}
    return leaves, lambda: relu(leaves["x"])


def _check_pad_crop(rng):
    rows, cols = _size(rng, 2, 4), _size(rng, 2, 5)
    bottom, right = _size(rng, 0, 2), _size(rng, 0, 3)
    leaves = {"x": _leaf(rng, (1, _size(rng, 1, 2), rows, cols), "x")}
    return leaves, lambda: crop(pad(leaves["x"], bottom, right), rows + bottom // 2, cols + right // 2)


def _check_reshape(rng):
    n, c, h, w = (_size(rng, 1, 3) for _ in range(4))
    leaves = {"x": _leaf(rng, (n, c, h, w), "x")}
    return leaves, lambda: reshape(leaves["x"], (n * h, c * w), axes=(0, 2, 1, 3))


def _check_cross_entropy(rng):
    pixels, classes = _size(rng, 2, 6), _size(rng, 2, 5)
    valid = rng.random((pixels, classes)) > 0.3
    targets = rng.integers(0, classes, pixels)
    valid[np.arange(pixels), targets] = True
    weights = rng.random(pixels)
    leaves = {"logits": _leaf(rng, (pixels, classes), "logits")}
    return leaves, lambda: cross_entropy(leaves["logits"], targets, weights, valid=valid)


def _check_inner_product(rng):
    max_disp, n, cols = _size(rng, 1, 3), _size(rng, 1, 2), _size(rng, 2, 5)
    theta, rows = _size(rng, 1, 3), _size(rng, 1, 3)
    leaves = {
        "left": _leaf(rng, (n, theta, rows, cols), "left"),
        "right": _leaf(rng, (n, theta, rows, cols + max_disp), "right"),
    }
    first_col = np.full(n, max_disp)
    valid = disparity_mask(n, cols, max_disp, first_col)
    return leaves, lambda: inner_product_volume(
        leaves["left"], leaves["right"], max_disp, offset=max_disp, valid=valid
    )


def _check_build_psi(rng):
    max_disp = _size(rng, 1, 3)
    shape = (_size(rng, 1, 2), _size(rng, 1, 3), _size(rng, 1, 3), max_disp + _size(rng, 1, 3))
    leaves = {"left": _leaf(rng, shape, "left"), "right": _leaf(rng, shape, "right")}
    return leaves, lambda: build_psi(leaves["left"], leaves["right"], max_disp)


def _check_learned_scores(rng):
    theta, kernel = _size(rng, 1, 3), int(rng.choice([1, 3]))
    grid = (_size(rng, 1, 2), _size(rng, 1, 3), _size(rng, 2, 4))
    head = CorrHead(theta, kernel=kernel, seed=int(rng.integers(1 << 31)), dtype=np.float64)
    leaves = {"psi": _leaf(rng, (int(np.prod(grid)), _size(rng, 2, 5), 2 * theta), "psi")}
    leaves.update(head.parameters())
    return leaves, lambda: learned_scores(leaves["psi"], head, grid)


def _model_check(arch: ArchPreset, mode: CorrelationMode):
    def factory(rng):
        spec = preset(arch, theta=MODEL_THETA, in_channels=1)
        size = 2 * spec.size_multiple
        model = build_model(
            spec, mode, MODEL_MAX_DISP, seed=int(rng.integers(1 << 31)), patch_size=size, dtype=np.float64
        )
        examples = []
        for first_col in (0, MODEL_MAX_DISP + 1):
            rows, cols = np.nonzero(np.ones((size, size), dtype=bool))
            disp = rng.integers(0, MODEL_MAX_DISP + 1, size=rows.size)
            keep = first_col + cols - disp >= 0
            examples.append(
                PatchExample(
                    sample_id=f"random-{first_col}",
                    top=0,
                    first_col=first_col,
                    left=rng.standard_normal((1, size, size)),
                    right=rng.standard_normal((1, size, size + MODEL_MAX_DISP)),
                    target_rows=rows[keep],
                    target_cols=cols[keep],
                    target_disp=disp[keep],
                )
            )
        leaves = model.parameters()
        return leaves, lambda: patch_loss(model, examples, training=True)

    return factory


OP_CHECKS: Dict[str, Callable] = {
    "conv2d": _check_conv2d,
    "conv2d_strided": _check_conv2d_strided,
    "maxpool2": _check_maxpool2,
    "deconv2": _check_deconv2,
    "batchnorm": _check_batchnorm,
    "relu": _check_relu,
    "pad_crop": _check_pad_crop,
    "reshape": _check_reshape,
    "cross_entropy": _check_cross_entropy,
    "inner_product_volume": _check_inner_product,
    "build_psi": _check_build_psi,
    "learned_scores": _check_learned_scores,
}

MODEL_CHECKS: Dict[str, Callable] = {
    f"{arch.value}-{mode.value}": _model_check(arch, mode)
    for arch in ArchPreset
    for mode in CorrelationMode
}


def available_checks() -> List[str]:
    return list(OP_CHECKS) + list(MODEL_CHECKS)


def run_checks(
    names: Optional[Sequence[str]] = None,
    seed: int = 0,
    tolerance: Optional[float] = None,
    max_entries: int = 32,
    seeds: Optional[int] = None,
    atol: Optional[float] = None,
) -> List[CheckResult]:
    """
    Run the named checks (all when ``names`` is empty) in double precision.

    Every check is repeated on ``seeds`` independent draws of shapes and
    values; a leaf's error is its worst over the draws. Each draw comes from
    its own (seed, check, draw) stream, so one check can be rerun alone with
    identical numbers.
    """
    tolerance = tolerance if tolerance is not None else Config.GRADCHECK_TOLERANCE
    seeds = seeds if seeds is not None else Config.GRADCHECK_SEEDS
    atol = atol if atol is not None else Config.GRADCHECK_ATOL
    if seeds < 1:
        raise ConfigurationError(f"gradient checks need at least one seed, got {seeds}")
    names = list(names) if names else available_checks()
    unknown = [name for name in names if name not in OP_CHECKS and name not in MODEL_CHECKS]
    if unknown:
        raise KeyError(f"unknown gradient checks: {', '.join(unknown)}")

    results = []
    for index, name in enumerate(available_checks()):
        if name not in names:
            continue
        factory = MODEL_CHECKS[name] if name in MODEL_CHECKS else OP_CHECKS[name]
        errors: Dict[str, float] = {}
        worst_draw, worst = 0, -1.0
        for draw in range(seeds):
            rng = stream(seed, "gradcheck", index, draw)
            leaves, graph = factory(rng)
            draw_errors = gradcheck(
                graph,
                leaves,
                epsilon=EPSILON,
                max_entries=max_entries,
                seed=int(rng.integers(1 << 31)),
                atol=atol,
            )
            for leaf, error in draw_errors.items():
                errors[leaf] = max(errors.get(leaf, 0.0), error)
            draw_worst = max_relative_error(draw_errors)
            if draw_worst > worst:
                worst_draw, worst = draw, draw_worst
        result = CheckResult(name=name, errors=errors, tolerance=tolerance, seeds=seeds, worst_draw=worst_draw)
        logger.info(
            "gradcheck %s: worst=%.3e (draw %d of %d) %s",
            name,
            result.worst,
            worst_draw,
            seeds,
            "ok" if result.passed else "FAIL",
        )
        results.append(result)
    return results
