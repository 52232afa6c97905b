"""Tests for the command-line surface and its exit codes."""

import logging

import numpy as np
import pytest
from click.testing import CliRunner

from app.cli import EXIT_FORMAT, EXIT_MISSING_PAIRS, EXIT_USAGE, cli
from app.config import ArchPreset, CorrelationMode
from app.manifest import RunManifest, manifest_path_for
from stereo import siamese
from stereo.correlation import build_model
from stereo.data import load_kitti, read_disparity, save_image, write_disparity
from stereo.inference import read_volume
from stereo.siamese import preset


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, [str(arg) for arg in args], obj={})


@pytest.fixture
def synth_root(runner, tmp_path):
    root = tmp_path / "synth"
    result = invoke(runner, "synth", "--out", root, "--count", 3, "--size", "16x32", "--max-disp", 4)
    assert result.exit_code == 0, result.output
    return root


class TestSynthCommand:
    """Test synthetic dataset generation."""

    def test_writes_loadable_layout(self, synth_root):
        """Test that generated scenes load back with ground truth."""
        samples = load_kitti(synth_root)
        assert [s.id for s in samples] == ["000000", "000001", "000002"]
        assert all(s.has_gt and s.shape == (16, 32) for s in samples)
        assert RunManifest.read(synth_root / "manifest.json").command == "synth"

    def test_bad_size(self, runner, tmp_path):
        """Test that malformed sizes are usage errors."""
        result = invoke(runner, "synth", "--out", tmp_path / "x", "--size", "sixteen")
        assert result.exit_code == EXIT_USAGE

    def test_range_too_wide(self, runner, tmp_path):
        """Test that D must stay below the width."""
        result = invoke(runner, "synth", "--out", tmp_path / "x", "--size", "16x8", "--max-disp", 8)
        assert result.exit_code == EXIT_USAGE


class TestTrainInferEval:
    """Test a tiny end-to-end run."""

    @pytest.fixture
    def checkpoint(self, runner, synth_root, tmp_path):
        out = tmp_path / "model.svlt"
        result = invoke(
            runner, "train", "--data", synth_root, "--arch", "s4", "--corr", "inner", "--max-disp", 4,
            "--theta", 4, "--iters", 2, "--batch", 2, "--out", out,
        )
        assert result.exit_code == 0, result.output
        return out

    def test_train_outputs(self, checkpoint):
        """Test checkpoint, log and manifest files."""
        assert siamese.load(checkpoint).max_disp == 4
        assert checkpoint.with_suffix(".log.csv").read_text().startswith("iter,loss,elapsed_s")
        manifest = RunManifest.read(checkpoint.with_suffix(".manifest.json"))
        assert manifest.status == "ok"
        assert manifest.config["iterations"] == 2

    def test_rerun_from_manifest(self, runner, checkpoint, tmp_path):
        """Test that replaying a manifest reproduces the checkpoint."""
        again = tmp_path / "again.svlt"
        result = invoke(
            runner, "train", "--from-manifest", checkpoint.with_suffix(".manifest.json"), "--out", again
        )
        assert result.exit_code == 0, result.output
        assert again.read_bytes() == checkpoint.read_bytes()

    def test_infer_and_eval(self, runner, checkpoint, synth_root, tmp_path):
        """Test directory inference followed by evaluation against the synthetic ground truth."""
        preds = tmp_path / "preds"
        result = invoke(runner, "infer", "--model", checkpoint, "--data", synth_root, "--out", preds)
        assert result.exit_code == 0, result.output
        assert sorted(p.name for p in preds.glob("*.png")) == [
            "000000_10.png", "000001_10.png", "000002_10.png",
        ]

        metrics = tmp_path / "metrics"
        result = invoke(
            runner, "eval", "--pred", preds, "--gt", synth_root / "disp_occ_0",
            "--noc-masks", synth_root / "disp_noc_0", "--out", metrics,
        )
        assert result.exit_code == 0, result.output
        assert ">3px Non-Occ" in result.output
        assert (metrics / "metrics.csv").is_file()

    def test_single_pair_with_volume(self, runner, checkpoint, synth_root, tmp_path):
        """Test one-pair inference with a cost-volume dump."""
        out = tmp_path / "pair.png"
        volume = tmp_path / "pair.bin"
        result = invoke(
            runner, "infer", "--model", checkpoint,
            "--left", synth_root / "image_2" / "000000_10.png",
            "--right", synth_root / "image_3" / "000000_10.png",
            "--out", out, "--dump-volume", volume, "--band-rows", 5,
        )
        assert result.exit_code == 0, result.output
        disparity, _ = read_disparity(out)
        assert disparity.shape == (16, 32)
        assert volume.stat().st_size == 20 + 16 * 32 * 5 * 4

    def test_train_needs_output(self, runner, synth_root):
        """Test that --out is required."""
        result = invoke(runner, "train", "--data", synth_root)
        assert result.exit_code == EXIT_USAGE

    def test_invalid_patch(self, runner, synth_root, tmp_path):
        """Test that a patch size the pools cannot halve is a usage error."""
        result = invoke(
            runner, "train", "--data", synth_root, "--patch", 9, "--theta", 4, "--iters", 1,
            "--out", tmp_path / "m.svlt",
        )
        assert result.exit_code == EXIT_USAGE


class TestEvalCommand:
    """Test evaluation exit codes."""

    @pytest.fixture
    def dirs(self, tmp_path):
        gt = np.arange(1, 25, dtype=np.float32).reshape(4, 6)
        for name in ("a.png", "b.png"):
            write_disparity(tmp_path / "gt" / name, gt)
            write_disparity(tmp_path / "pred" / name, gt)
        return tmp_path / "pred", tmp_path / "gt"

    def test_perfect(self, runner, dirs):
        """Test exit 0 and a zero aggregate for exact predictions."""
        result = invoke(runner, "eval", "--pred", dirs[0], "--gt", dirs[1], "--thresholds", "3")
        assert result.exit_code == 0, result.output
        assert "0.00" in result.output

    def test_missing_pair(self, runner, dirs):
        """Test exit 1 when a ground-truth file has no prediction."""
        (dirs[0] / "b.png").unlink()
        result = invoke(runner, "eval", "--pred", dirs[0], "--gt", dirs[1])
        assert result.exit_code == EXIT_MISSING_PAIRS

    def test_no_ground_truth(self, runner, tmp_path):
        """Test exit 1 when every ground-truth pixel is invalid."""
        write_disparity(tmp_path / "gt" / "a.png", np.ones((3, 3)), np.zeros((3, 3), dtype=bool))
        write_disparity(tmp_path / "pred" / "a.png", np.ones((3, 3)))
        result = invoke(runner, "eval", "--pred", tmp_path / "pred", "--gt", tmp_path / "gt")
        assert result.exit_code == EXIT_MISSING_PAIRS

    def test_size_mismatch(self, runner, dirs):
        """Test exit 4 when prediction and ground truth differ in size."""
        write_disparity(dirs[0] / "a.png", np.ones((4, 5)))
        result = invoke(runner, "eval", "--pred", dirs[0], "--gt", dirs[1])
        assert result.exit_code == EXIT_FORMAT


class TestInferCommand:
    """Test inference argument and file errors."""

    @pytest.fixture
    def images(self, tmp_path):
        image = np.random.default_rng(0).uniform(0, 255, (1, 8, 12)).astype(np.float32)
        save_image(tmp_path / "left.png", image)
        save_image(tmp_path / "right.png", image)
        return tmp_path / "left.png", tmp_path / "right.png"

    def test_corrupt_model(self, runner, images, tmp_path):
        """Test exit 4 for a file that is not a checkpoint."""
        model = tmp_path / "junk.svlt"
        model.write_bytes(b"definitely not a model")
        result = invoke(
            runner, "infer", "--model", model, "--left", images[0], "--right", images[1],
            "--out", tmp_path / "out.png",
        )
        assert result.exit_code == EXIT_FORMAT

    def test_range_wider_than_trained(self, runner, make_model, tmp_path):
        """Test that --max-disp 32 runs a D = 16 checkpoint over 33 disparities."""
        model = siamese.save(make_model(max_disp=16).checkpoint(), tmp_path / "d16.svlt")
        rng = np.random.default_rng(5)
        left = save_image(tmp_path / "wide_left.png", rng.uniform(0, 255, (1, 8, 40)))
        right = save_image(tmp_path / "wide_right.png", rng.uniform(0, 255, (1, 8, 40)))
        out, volume = tmp_path / "wide.png", tmp_path / "wide.bin"
        result = invoke(
            runner, "infer", "--model", model, "--left", left, "--right", right,
            "--max-disp", 32, "--out", out, "--dump-volume", volume,
        )
        assert result.exit_code == 0, result.output
        assert read_volume(volume).shape == (8, 40, 33)
        disparity, _ = read_disparity(out)
        assert disparity.max() <= 32
        assert RunManifest.read(manifest_path_for(out)).config["max_disp"] == 32

    def test_untrained_model(self, runner, images, tmp_path):
        """Test exit 4 for a checkpoint saved before batch norm saw any data."""
        untrained = build_model(preset(ArchPreset.S4, theta=4, in_channels=1), CorrelationMode.INNER, 4, seed=0)
        model = siamese.save(untrained.checkpoint(), tmp_path / "untrained.svlt")
        out = tmp_path / "out.png"
        result = invoke(runner, "infer", "--model", model, "--left", images[0], "--right", images[1], "--out", out)
        assert result.exit_code == EXIT_FORMAT
        assert not out.exists()

    def test_needs_inputs(self, runner, tmp_path):
        """Test that a pair or a dataset must be given."""
        model = tmp_path / "junk.svlt"
        model.write_bytes(b"")
        result = invoke(runner, "infer", "--model", model, "--out", tmp_path / "out.png")
        assert result.exit_code == EXIT_USAGE


class TestDiagnostics:
    """Test gradcheck and rf."""

    def test_gradcheck_subset(self, runner):
        """Test a passing subset of op checks."""
        result = invoke(runner, "gradcheck", "--ops", "conv2d,relu", "--seeds", 3)
        assert result.exit_code == 0, result.output
        assert "over 2 checks x 3 seeds" in result.output

    def test_gradcheck_unknown(self, runner):
        """Test that unknown check names are usage errors."""
        result = invoke(runner, "gradcheck", "--ops", "conv3d")
        assert result.exit_code == EXIT_USAGE

    def test_receptive_fields(self, runner):
        """Test the preset table and the pool-free stack."""
        result = invoke(runner, "rf")
        assert result.exit_code == 0, result.output
        lines = result.output.splitlines()
        assert any(line.split()[:1] == ["s9"] and line.split()[-2:] == ["92", "92"] for line in lines)
        assert "pool-free 128-layer stack: 257" in result.output
