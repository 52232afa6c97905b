"""Command-line entry point: train, infer, eval, gradcheck, synth and rf."""

import functools
import logging
import sys
from pathlib import Path
from typing import List

import click
from pydantic import ValidationError

from app.config import ArchPreset, ColorMode, Config, CorrelationMode, KittiEdition
from app.manifest import RunManifest, manifest_path_for
from stereo import siamese
from stereo.correlation import StereoModel
from stereo.data import (
    SynthConfig,
    disparity_histogram,
    frame_ids,
    load_image,
    load_kitti,
    load_sample,
    make_split,
    synth_generate,
    write_disparity,
    write_kitti,
)
from stereo.errors import (
    ConfigurationError,
    FormatError,
    ModelStateError,
    NoGroundTruthError,
    NumericalError,
    ShapeError,
)
from stereo.gradsuite import available_checks, run_checks
from stereo.inference import THRESHOLDS, evaluate, infer, write_volume
from stereo.training import TrainConfig, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING_PAIRS = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_FORMAT = 4

LOG_FORMAT = "%(asctime)s level=%(levelname)s logger=%(name)s %(message)s"


def setup_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)


def exit_codes(command):
    """Translate library errors into the stable exit-code contract."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (FormatError, ModelStateError, ShapeError) as exc:
            logger.error("model/format mismatch: %s", exc)
            sys.exit(EXIT_FORMAT)
        except NumericalError as exc:
            logger.error("numeric failure: %s", exc)
            sys.exit(EXIT_NUMERIC)
        except NoGroundTruthError as exc:
            logger.error("%s", exc)
            sys.exit(EXIT_MISSING_PAIRS)
        except (ConfigurationError, ValidationError, ValueError) as exc:
            logger.error("invalid configuration: %s", exc)
            sys.exit(EXIT_USAGE)

    return wrapper


def _parse_size(value: str) -> tuple:
    try:
        rows, cols = (int(part) for part in value.lower().split("x"))
    except ValueError as exc:
        raise click.BadParameter(f"expected ROWSxCOLS, got {value!r}") from exc
    return rows, cols


def _parse_thresholds(value: str) -> List[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from exc


@click.group(context_settings={"auto_envvar_prefix": "STEREO", "help_option_names": ["-h", "--help"]})
@click.option("--log-level", default=Config.LOG_LEVEL, show_default=True, help="Root logger level.")
@click.option("--threads", type=click.IntRange(min=1), default=Config.THREADS, show_default=True)
@click.pass_context
def cli(ctx, log_level: str, threads: int):
    """Siamese-CNN stereo matching toolkit."""
    setup_logging(log_level)
    try:
        Config.validate()
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads


@cli.command("train")
@click.option("--data", type=click.Path(file_okay=False, path_type=Path), help="KITTI-layout training root.")
@click.option("--edition", type=click.Choice([e.value for e in KittiEdition]), default=KittiEdition.KITTI2015.value)
@click.option("--arch", type=click.Choice([a.value for a in ArchPreset]), default=ArchPreset.S4.value)
@click.option("--corr", type=click.Choice([m.value for m in CorrelationMode]), default=CorrelationMode.INNER.value)
@click.option("--max-disp", type=int, default=None, help="Defaults to STEREO_KITTI_MAX_DISP.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Checkpoint path.")
@click.option("--iters", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--patch", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--head-kernel", type=click.Choice(["1", "3"]), default="3")
@click.option("--theta", type=int, default=None)
@click.option("--lr-decay/--no-lr-decay", default=False)
@click.option("--split/--no-split", default=True, help="Train on the training part of the seeded split only.")
@click.option("--from-manifest", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.pass_context
@exit_codes
def train_command(ctx, data, edition, arch, corr, max_disp, out, iters, lr, batch, patch, seed,
                  head_kernel, theta, lr_decay, split, from_manifest):
    """Train a matcher on random patches."""
    if from_manifest is not None:
        previous = RunManifest.read(from_manifest)
        settings = dict(previous.config)
        data = Path(settings.pop("data"))
        edition = settings.pop("edition")
        split = settings.pop("split")
        out = out or Path(previous.outputs["checkpoint"])
        cfg = TrainConfig(**settings)
    else:
        if data is None:
            raise click.UsageError("--data is required")
        if out is None:
            raise click.UsageError("--out is required")
        overrides = {
            "max_disp": max_disp,
            "iterations": iters,
            "lr": lr,
            "batch_size": batch,
            "patch_size": patch,
            "seed": seed,
            "theta": theta,
        }
        cfg = TrainConfig(
            arch=arch,
            correlation=corr,
            head_kernel=int(head_kernel),
            lr_decay=lr_decay,
            **{key: value for key, value in overrides.items() if value is not None},
        )

    samples = load_kitti(data, edition)
    if split:
        ids = make_split([s.id for s in samples], edition, cfg.seed).train
        samples = [s for s in samples if s.id in set(ids)]

    config = cfg.model_dump(mode="json")
    config.update(data=str(data), edition=KittiEdition(edition).value, split=split)
    manifest = RunManifest(command="train", config=config, seed=cfg.seed, threads=ctx.obj["threads"])
    log_path = out.with_suffix(".log.csv")
    try:
        result = train(cfg, samples, log_path=log_path)
    except NumericalError:
        manifest.finish(status="numeric-failure", log=log_path).write(manifest_path_for(out))
        raise
    siamese.save(result.model.checkpoint(), out)
    manifest.finish(checkpoint=out, log=log_path).write(manifest_path_for(out))
    click.echo(f"trained {result.steps} steps; checkpoint {out}")


def _write_prediction(model: StereoModel, left, right, out: Path, max_disp, band_rows, threads, dump_volume):
    prediction = infer(
        model,
        left,
        right,
        max_disp=max_disp,
        band_rows=band_rows,
        threads=threads,
        keep_volume=dump_volume is not None,
    )
    write_disparity(out, prediction.disparity, prediction.valid)
    if dump_volume is not None:
        write_volume(dump_volume, prediction.volume)
    return prediction


@cli.command("infer")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option("--left", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option("--right", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option("--data", type=click.Path(file_okay=False, exists=True, path_type=Path),
              help="Predict every frame of a KITTI-layout root instead of one pair.")
@click.option("--edition", type=click.Choice([e.value for e in KittiEdition]), default=KittiEdition.KITTI2015.value)
@click.option("--max-disp", type=int, default=None, help="Defaults to the checkpoint's D.")
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="Disparity PNG, or a directory with --data.")
@click.option("--band-rows", type=click.IntRange(min=1), default=Config.BAND_ROWS, show_default=True)
@click.option("--dump-volume", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
@exit_codes
def infer_command(ctx, model_path, left, right, data, edition, max_disp, out, band_rows, dump_volume):
    """Predict disparities with a trained checkpoint."""
    if data is None and (left is None or right is None):
        raise click.UsageError("give --left and --right, or --data")
    threads = ctx.obj["threads"]
    checkpoint = siamese.load(model_path)
    model = StereoModel.from_checkpoint(checkpoint)
    color = ColorMode.RGB if model.arch.in_channels == 3 else ColorMode.GRAY
    manifest = RunManifest(
        command="infer",
        config={
            "model": str(model_path),
            "max_disp": max_disp or model.max_disp,
            "band_rows": band_rows,
            "data": str(data) if data else None,
            "left": str(left) if left else None,
            "right": str(right) if right else None,
        },
        seed=Config.SEED,
        threads=threads,
    )

    if data is None:
        _write_prediction(
            model, load_image(left, color), load_image(right, color), out, max_disp, band_rows, threads, dump_volume
        )
        click.echo(f"wrote {out}")
    else:
        frames = frame_ids(data, edition)
        for frame in frames:
            sample = load_sample(data, edition, frame, color)
            _write_prediction(
                model, sample.left, sample.right, out / f"{frame}_10.png", max_disp, band_rows, threads, None
            )
        click.echo(f"wrote {len(frames)} disparity maps to {out}")
    manifest.finish(prediction=out).write(manifest_path_for(out))


@cli.command("eval")
@click.option("--pred", required=True, type=click.Path(file_okay=False, exists=True, path_type=Path))
@click.option("--gt", required=True, type=click.Path(file_okay=False, exists=True, path_type=Path))
@click.option("--noc-masks", type=click.Path(file_okay=False, exists=True, path_type=Path), default=None)
@click.option("--thresholds", default=",".join(str(t) for t in THRESHOLDS), show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for metrics.csv and metrics.txt.")
@click.pass_context
@exit_codes
def eval_command(ctx, pred, gt, noc_masks, thresholds, out):
    """Bad-pixel error rates of predicted disparity PNGs."""
    values = _parse_thresholds(thresholds)
    result = evaluate(pred, gt, noc_masks, thresholds=values, threads=ctx.obj["threads"])
    click.echo(result.report.to_text())
    if out is not None:
        result.report.write(out)
    for name in result.missing:
        click.echo(f"missing pair: {name}", err=True)
    if result.missing:
        ctx.exit(EXIT_MISSING_PAIRS)


@cli.command("gradcheck")
@click.option("--ops", default="all", show_default=True,
              help=f"'all' or comma-separated names from: {', '.join(available_checks())}")
@click.option("--seed", type=int, default=Config.SEED, show_default=True)
@click.option("--tolerance", type=float, default=Config.GRADCHECK_TOLERANCE, show_default=True)
@click.option("--seeds", type=click.IntRange(min=1), default=Config.GRADCHECK_SEEDS, show_default=True,
              help="Independent draws of shapes and values per check.")
@click.pass_context
@exit_codes
def gradcheck_command(ctx, ops, seed, tolerance, seeds):
    """Compare analytic and finite-difference gradients in double precision."""
    names = None if ops == "all" else [name.strip() for name in ops.split(",") if name.strip()]
    try:
        results = run_checks(names, seed=seed, tolerance=tolerance, seeds=seeds)
    except KeyError as exc:
        raise click.UsageError(str(exc)) from exc
    failed = [r for r in results if not r.passed]
    for result in results:
        click.echo(f"{result.name:<24} {result.worst:.3e} {'ok' if result.passed else 'FAIL'}")
    worst = max((r.worst for r in results), default=0.0)
    click.echo(f"worst relative error {worst:.3e} over {len(results)} checks x {seeds} seeds")
    if failed:
        ctx.exit(EXIT_NUMERIC)


@cli.command("synth")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--count", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--max-disp", type=int, default=Config.SYNTH_MAX_DISP, show_default=True)
@click.option("--size", default="64x96", show_default=True, help="ROWSxCOLS")
@click.option("--seed", type=int, default=Config.SEED, show_default=True)
@click.option("--occluders", type=click.IntRange(min=0), default=2, show_default=True)
@click.option("--textureless-bands", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--edition", type=click.Choice([e.value for e in KittiEdition]), default=KittiEdition.KITTI2015.value)
@click.pass_context
@exit_codes
def synth_command(ctx, out, count, max_disp, size, seed, occluders, textureless_bands, edition):
    """Write a synthetic dataset in the KITTI layout."""
    rows, cols = _parse_size(size)
    cfg = SynthConfig(
        count=count,
        rows=rows,
        cols=cols,
        max_disp=max_disp,
        seed=seed,
        occluders=occluders,
        textureless_bands=textureless_bands,
    )
    samples = synth_generate(cfg)
    write_kitti(samples, out, edition)
    modes = sorted({d for s in samples for d in disparity_histogram(s)})
    RunManifest(command="synth", config=cfg.model_dump(mode="json") | {"edition": edition}, seed=seed).finish(
        dataset=out
    ).write(out / "manifest.json")
    click.echo(f"wrote {len(samples)} pairs to {out} (disparities {modes[0]}..{modes[-1]})")


@cli.command("rf")
@exit_codes
def rf_command():
    """Receptive field of each preset: analytic and traced."""
    rows = siamese.receptive_field_table()
    click.echo(f"{'arch':<6}{'convs':>6}{'pools':>6}{'analytic':>10}{'traced':>8}")
    for row in rows:
        click.echo(
            f"{row['arch']:<6}{row['conv_layers']:>6}{row['pools']:>6}{row['analytic']:>10}{row['traced']:>8}"
        )
    click.echo(f"pool-free 128-layer stack: {siamese.stacked_receptive_field(128)}")


def main() -> None:
    cli(obj={})


if __name__ == "__main__":
    main()
