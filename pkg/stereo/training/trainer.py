"""Adam optimization over randomly sampled patch batches."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from stereo.correlation import StereoModel, build_model
from stereo.data.samples import StereoSample
from stereo.errors import ConfigurationError, NumericalError
from stereo.rng import stream, stream_seed
from stereo.tensor import Adam
from stereo.training.config import TrainConfig
from stereo.training.loss import patch_loss
from stereo.training.sampler import PatchExample, prepare, sample_patch

logger = logging.getLogger(__name__)

LOG_HEADER = "iter,loss,elapsed_s"


@dataclass
class TrainResult:
    model: StereoModel
    history: List[Dict[str, float]] = field(default_factory=list)
    skipped_patches: int = 0
    steps: int = 0


def _draw_batch(
    samples: List[StereoSample],
    images: List,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple:
    """Sample patches across all training images; returns (examples, skipped)."""
    examples: List[PatchExample] = []
    skipped = 0
    for _ in range(cfg.batch_size):
        index = int(rng.integers(len(samples)))
        example = sample_patch(samples[index], cfg, rng, images[index])
        if example is None:
            skipped += 1
        else:
            examples.append(example)
    return examples, skipped


def _check_parameters(model: StereoModel, iteration: int, lr: float, loss: float) -> None:
    for name, tensor in model.parameters().items():
        if not np.all(np.isfinite(tensor.data)):
            logger.error("parameter %s became non-finite at iter=%d", name, iteration)
            raise NumericalError(
                iteration=iteration, lr=lr, batch_id=iteration, loss=loss, parameter=name
            )


def train(
    cfg: TrainConfig,
    samples: List[StereoSample],
    model: Optional[StereoModel] = None,
    log_path: Optional[Union[str, Path]] = None,
    on_log: Optional[Callable[[Dict[str, float]], None]] = None,
) -> TrainResult:
    """
    Run ``cfg.iterations`` Adam steps.

    Patches are drawn per batch from all labelled samples. With a fixed seed
    the run is deterministic. A non-finite loss aborts with NumericalError.
    """
    samples = [s for s in samples if s.has_gt]
    if not samples:
        raise ConfigurationError("training needs at least one sample with ground truth")
    if model is None:
        model = build_model(
            cfg.arch_spec(),
            cfg.correlation,
            cfg.max_disp,
            seed=stream_seed(cfg.seed, "init"),
            head_kernel=cfg.head_kernel,
            patch_size=cfg.patch_size,
        )
    images = [prepare(sample) for sample in samples]
    rng = stream(cfg.seed, "sampling")
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    result = TrainResult(model=model)

    log_file = None
    if log_path is not None:
        log_path = Path(log_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_file = log_path.open("w")
        log_file.write(LOG_HEADER + "\n")

    logger.info(
        "training arch=%s corr=%s D=%d patch=%d batch=%d iters=%d lr=%g samples=%d",
        cfg.arch.value,
        cfg.correlation.value,
        cfg.max_disp,
        cfg.patch_size,
        cfg.batch_size,
        cfg.iterations,
        cfg.lr,
        len(samples),
    )
    started = time.perf_counter()
    window: List[float] = []
    try:
        for iteration in range(1, cfg.iterations + 1):
            lr = cfg.lr_at(iteration)
            optimizer.set_lr(lr)
            examples, skipped = _draw_batch(samples, images, cfg, rng)
            result.skipped_patches += skipped
            if examples:
                optimizer.zero_grad()
                loss = patch_loss(model, examples, training=True)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise NumericalError(iteration=iteration, lr=lr, batch_id=iteration, loss=value)
                loss.backward()
                optimizer.step()
                _check_parameters(model, iteration, lr, value)
                result.steps += 1
                window.append(value)

            # a window whose batches were all skipped has nothing to report
            if window and (iteration % cfg.log_every == 0 or iteration == cfg.iterations):
                record = {
                    "iter": iteration,
                    "loss": float(np.mean(window)),
                    "elapsed_s": time.perf_counter() - started,
                }
                window = []
                result.history.append(record)
                logger.info(
                    "iter=%d loss=%.4f elapsed_s=%.1f lr=%g",
                    record["iter"],
                    record["loss"],
                    record["elapsed_s"],
                    lr,
                )
                if log_file is not None:
                    log_file.write(f"{record['iter']},{record['loss']:.6f},{record['elapsed_s']:.3f}\n")
                    log_file.flush()
                if on_log is not None:
                    on_log(record)
    finally:
        if log_file is not None:
            log_file.close()

    if result.skipped_patches:
        logger.warning("skipped %d patches without labelled pixels", result.skipped_patches)
    return result
