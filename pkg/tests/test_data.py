"""Tests for disparity PNGs, images, KITTI layouts, synthetic scenes and splits."""

import numpy as np
import pytest
from PIL import Image
from pydantic import ValidationError

from app.config import ColorMode, KittiEdition
from stereo.data import (
    StereoSample,
    SynthConfig,
    disparity_histogram,
    disparity_png_decode,
    disparity_png_encode,
    frame_ids,
    load_image,
    load_kitti,
    make_split,
    normalize,
    read_disparity,
    save_image,
    synth_generate,
    write_disparity,
    write_kitti,
)
from stereo.errors import FormatError, ShapeError


class TestDisparityPng:
    """Test the 16-bit disparity codec."""

    def test_quantization_to_256ths(self):
        """Test that values come back rounded to 1/256 px."""
        disparity = np.array([[1.0, 2.5], [10.3, 100.0]])
        decoded, valid = disparity_png_decode(disparity_png_encode(disparity))
        assert valid.all()
        np.testing.assert_allclose(decoded, np.round(disparity * 256) / 256, atol=1e-6)

    def test_invalid_pixels_stored_as_zero(self):
        """Test that masked and NaN pixels decode as invalid."""
        disparity = np.array([[3.0, np.nan], [4.0, 5.0]])
        valid = np.array([[True, True], [False, True]])
        decoded, decoded_valid = disparity_png_decode(disparity_png_encode(disparity, valid & np.isfinite(disparity)))
        np.testing.assert_array_equal(decoded_valid, [[True, False], [False, True]])
        assert decoded[1, 0] == 0.0

    def test_zero_disparity_reads_as_invalid(self):
        """Test the 0 = no value convention."""
        _, valid = disparity_png_decode(disparity_png_encode(np.zeros((2, 2))))
        assert not valid.any()

    def test_rejects_negative(self):
        """Test that negative disparities cannot be written."""
        with pytest.raises(FormatError):
            disparity_png_encode(np.array([[-1.0]]))

    def test_rejects_out_of_range(self):
        """Test that disparities beyond 65535 / 256 are refused."""
        with pytest.raises(FormatError):
            disparity_png_encode(np.array([[300.0]]))

    def test_garbage_payload(self):
        """Test that non-PNG bytes raise FormatError with the path."""
        with pytest.raises(FormatError) as excinfo:
            disparity_png_decode(b"not a png", path="x.png")
        assert excinfo.value.path == "x.png"

    def test_rgb_png_rejected(self, tmp_path):
        """Test that colour images are not mistaken for disparity maps."""
        path = tmp_path / "rgb.png"
        Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(path)
        with pytest.raises(FormatError):
            read_disparity(path)

    def test_file_round_trip(self, tmp_path):
        """Test write_disparity/read_disparity on disk."""
        path = write_disparity(tmp_path / "sub" / "d.png", np.full((3, 4), 7.25))
        decoded, valid = read_disparity(path)
        assert decoded.dtype == np.float32
        np.testing.assert_array_equal(decoded, 7.25)
        assert valid.all()


class TestImages:
    """Test image decoding and normalization."""

    def test_normalize_statistics(self):
        """Test zero mean and unit deviation per channel."""
        image = np.random.default_rng(0).uniform(0, 255, size=(3, 10, 12))
        out = normalize(image, dtype=np.float64)
        assert out.shape == (1, 3, 10, 12)
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=(0, 2, 3)), 1.0, atol=1e-12)

    def test_normalize_constant_image(self):
        """Test that a flat image becomes exact zeros."""
        out = normalize(np.full((5, 6), 42.0))
        assert out.shape == (1, 1, 5, 6)
        assert not out.any()

    def test_normalize_is_idempotent(self):
        """Test that normalizing a normalized image changes nothing."""
        image = np.random.default_rng(1).uniform(0, 255, size=(3, 8, 9))
        once = normalize(image, dtype=np.float64)
        np.testing.assert_allclose(normalize(once, dtype=np.float64), once, rtol=1e-12, atol=1e-12)

    def test_normalize_rejects_batches(self):
        """Test that only single images are accepted."""
        with pytest.raises(ValueError):
            normalize(np.zeros((2, 1, 3, 3)))

    def test_save_and_load_gray(self, tmp_path):
        """Test an 8-bit grayscale round trip."""
        image = np.arange(12, dtype=np.float32).reshape(1, 3, 4) * 20
        path = save_image(tmp_path / "g.png", image)
        loaded = load_image(path, ColorMode.GRAY)
        np.testing.assert_array_equal(loaded, image)

    def test_gray_file_loaded_as_rgb(self, tmp_path):
        """Test that RGB mode replicates gray intensities to three channels."""
        path = save_image(tmp_path / "g.png", np.full((1, 2, 2), 100.0))
        loaded = load_image(path, ColorMode.RGB)
        assert loaded.shape == (3, 2, 2)
        np.testing.assert_array_equal(loaded, 100.0)

    def test_undecodable(self, tmp_path):
        """Test that broken image files raise FormatError."""
        path = tmp_path / "broken.png"
        path.write_bytes(b"\x89PNG broken")
        with pytest.raises(FormatError):
            load_image(path)


class TestStereoSample:
    """Test sample validation."""

    def test_size_mismatch(self):
        """Test that left and right views must agree in size."""
        with pytest.raises(ShapeError):
            StereoSample(id="a", left=np.zeros((1, 4, 5)), right=np.zeros((1, 4, 6)))

    def test_gt_defaults(self):
        """Test that validity comes from finiteness and noc defaults to it."""
        gt = np.array([[1.0, np.nan]])
        sample = StereoSample(id="a", left=np.zeros((1, 1, 2)), right=np.zeros((1, 1, 2)), gt=gt)
        np.testing.assert_array_equal(sample.gt_valid, [[True, False]])
        np.testing.assert_array_equal(sample.noc, sample.gt_valid)

    def test_noc_outside_valid(self):
        """Test that non-occluded pixels must have ground truth."""
        with pytest.raises(ShapeError):
            StereoSample(
                id="a",
                left=np.zeros((1, 1, 2)),
                right=np.zeros((1, 1, 2)),
                gt=np.ones((1, 2)),
                gt_valid=np.array([[True, False]]),
                noc=np.array([[True, True]]),
            )


class TestSynthetic:
    """Test the synthetic scene generator."""

    @pytest.fixture
    def scenes(self):
        return synth_generate(SynthConfig(count=4, rows=32, cols=48, max_disp=12, seed=3))

    def test_rewarp_identity(self, scenes):
        """Test left(i, j) == right(i, j - gt) on every non-occluded pixel."""
        for sample in scenes:
            rows, cols = np.nonzero(sample.noc)
            partner = cols - sample.gt[rows, cols].astype(int)
            assert (partner >= 0).all()
            np.testing.assert_array_equal(sample.left[0, rows, cols], sample.right[0, rows, partner])

    def test_disparities_in_range(self, scenes):
        """Test integer disparities within [1, D] and dense validity."""
        for sample in scenes:
            assert sample.gt_valid.all()
            assert sample.gt.min() >= 1 and sample.gt.max() <= 12
            np.testing.assert_array_equal(sample.gt, np.round(sample.gt))

    def test_two_plane_modes(self):
        """Test that fixed background and occluder disparities are the only values."""
        cfg = SynthConfig(count=3, rows=32, cols=48, max_disp=16, bg_disparity=4, occluder_disparity=12, seed=1)
        for sample in synth_generate(cfg):
            assert set(disparity_histogram(sample)) <= {4, 12}
            assert 4 in disparity_histogram(sample)

    def test_constant_scene_without_occluders(self):
        """Test a single fronto-parallel plane with a planted disparity."""
        cfg = SynthConfig(count=1, rows=16, cols=32, max_disp=8, bg_disparity=5, occluders=0, seed=0)
        sample = synth_generate(cfg)[0]
        np.testing.assert_array_equal(sample.gt, 5.0)
        np.testing.assert_array_equal(sample.noc[:, :5], False)
        np.testing.assert_array_equal(sample.noc[:, 5:], True)
        np.testing.assert_array_equal(sample.left[0, :, 5:], sample.right[0, :, :-5])

    def test_seed_determinism(self):
        """Test that the same seed reproduces identical scenes."""
        cfg = SynthConfig(count=2, rows=16, cols=32, max_disp=8, seed=9)
        first, second = synth_generate(cfg), synth_generate(cfg)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.left, b.left)
            np.testing.assert_array_equal(a.gt, b.gt)

    def test_textureless_bands(self):
        """Test that flattened bands leave constant-intensity columns."""
        cfg = SynthConfig(count=1, rows=16, cols=64, max_disp=8, occluders=0, textureless_bands=1,
                          band_width=12, bg_disparity=2, seed=4)
        left = synth_generate(cfg)[0].left[0]
        flat_columns = np.all(left == left[0], axis=0)
        assert flat_columns.sum() >= 10

    def test_config_validation(self):
        """Test that inconsistent settings are rejected."""
        with pytest.raises(ValidationError):
            SynthConfig(cols=16, max_disp=16)
        with pytest.raises(ValidationError):
            SynthConfig(max_disp=16, bg_disparity=8, occluder_disparity=6)
        with pytest.raises(ValidationError):
            SynthConfig(band_width=5)


class TestKittiLayout:
    """Test reading and writing the KITTI directory layout."""

    @pytest.fixture
    def scenes(self):
        return synth_generate(SynthConfig(count=3, rows=16, cols=32, max_disp=8, seed=2))

    @pytest.mark.parametrize("edition", list(KittiEdition))
    def test_write_then_load(self, scenes, tmp_path, edition):
        """Test that written scenes load back with identical pixels and ground truth."""
        write_kitti(scenes, tmp_path, edition)
        assert frame_ids(tmp_path, edition) == ["000000", "000001", "000002"]
        loaded = load_kitti(tmp_path, edition, ColorMode.GRAY)
        for original, sample in zip(scenes, loaded):
            assert sample.id == original.id
            np.testing.assert_array_equal(sample.left, original.left)
            np.testing.assert_array_equal(sample.gt, original.gt)
            np.testing.assert_array_equal(sample.noc, original.noc)

    def test_gray_fallback_directories(self, scenes, tmp_path):
        """Test that KITTI 2012 grayscale folders are found."""
        write_kitti(scenes, tmp_path, KittiEdition.KITTI2012)
        (tmp_path / "colored_0").rename(tmp_path / "image_0")
        (tmp_path / "colored_1").rename(tmp_path / "image_1")
        assert len(load_kitti(tmp_path, KittiEdition.KITTI2012, ColorMode.GRAY)) == 3

    def test_testing_split_without_gt(self, scenes, tmp_path):
        """Test that frames without disparity files load for inference only."""
        write_kitti([StereoSample(id=s.id, left=s.left, right=s.right) for s in scenes], tmp_path)
        loaded = load_kitti(tmp_path, KittiEdition.KITTI2015, ColorMode.GRAY)
        assert not any(sample.has_gt for sample in loaded)

    def test_missing_root(self, tmp_path):
        """Test that a root without images is a format error."""
        with pytest.raises(FormatError):
            load_kitti(tmp_path / "nothing", KittiEdition.KITTI2015)


class TestSplits:
    """Test deterministic train/validation splits."""

    def test_kitti_cardinalities(self):
        """Test 160/34 for KITTI 2012 and 160/40 for KITTI 2015."""
        split_2012 = make_split([f"{i:06d}" for i in range(194)], KittiEdition.KITTI2012, seed=0)
        split_2015 = make_split([f"{i:06d}" for i in range(200)], KittiEdition.KITTI2015, seed=0)
        assert (len(split_2012.train), len(split_2012.validation)) == (160, 34)
        assert (len(split_2015.train), len(split_2015.validation)) == (160, 40)

    def test_disjoint_and_complete(self):
        """Test that train and validation partition the ids."""
        ids = [f"{i:06d}" for i in range(25)]
        split = make_split(ids, None, seed=4)
        assert not set(split.train) & set(split.validation)
        assert sorted(split.train + split.validation) == ids
        assert len(split.train) == 20

    def test_seeded(self):
        """Test that the split depends only on the seed."""
        ids = [f"{i:06d}" for i in range(50)]
        assert make_split(ids, None, 1) == make_split(list(reversed(ids)), None, 1)
        assert make_split(ids, None, 1).train != make_split(ids, None, 2).train
