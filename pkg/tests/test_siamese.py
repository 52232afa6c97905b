"""Tests for siamese architectures, receptive fields and checkpoints."""

import numpy as np
import pytest
from pydantic import ValidationError

from app.config import ArchPreset, CorrelationMode
from stereo import siamese
from stereo.correlation import StereoModel
from stereo.errors import ConfigurationError, FormatError, ModelStateError, ShapeError
from stereo.siamese import (
    ArchSpec,
    build,
    dependency_receptive_field,
    preset,
    receptive_field,
    receptive_field_table,
    stacked_receptive_field,
)
from stereo.tensor import Tensor


class TestArchSpec:
    """Test architecture descriptions."""

    def test_presets(self):
        """Test conv counts, pool positions and size multiples of the presets."""
        s4, s7, s9 = (preset(name, theta=8, in_channels=1) for name in ArchPreset)
        assert (s4.conv_layers, s4.pool_after, s4.size_multiple) == (4, [2], 2)
        assert (s7.conv_layers, s7.pool_after, s7.size_multiple) == (7, [2, 4], 4)
        assert (s9.conv_layers, s9.pool_after, s9.size_multiple) == (9, [2, 4, 6], 8)

    def test_layer_schedule(self):
        """Test that deconvolutions follow the last conv block, one per pool."""
        schedule = preset(ArchPreset.S7, theta=8, in_channels=1).layer_schedule()
        assert schedule == [
            ("conv", 1), ("conv", 2), ("pool", 1), ("conv", 3), ("conv", 4), ("pool", 2),
            ("conv", 5), ("conv", 6), ("conv", 7), ("deconv", 1), ("deconv", 2),
        ]

    def test_pool_positions_must_increase(self):
        """Test that unsorted pool positions are rejected."""
        with pytest.raises(ValidationError):
            ArchSpec(conv_layers=5, pool_after=[3, 2])

    def test_pool_after_last_block_rejected(self):
        """Test that a pool cannot follow the final conv block."""
        with pytest.raises(ValidationError):
            ArchSpec(conv_layers=3, pool_after=[3])

    def test_kernel_size_fixed(self):
        """Test that only 3x3 kernels are accepted."""
        with pytest.raises(ValidationError):
            ArchSpec(conv_layers=2, kernel_size=5)


class TestReceptiveField:
    """Test analytic and traced receptive fields."""

    def test_analytic_values(self):
        """Test the analytic receptive field of each preset."""
        values = [receptive_field(preset(name, theta=1, in_channels=1)) for name in ArchPreset]
        assert values == [16, 44, 92]

    def test_pool_free_stack(self):
        """Test n * (w - 1) + 1 for pool-free stacks."""
        assert stacked_receptive_field(1) == 3
        assert stacked_receptive_field(128) == 257
        assert receptive_field(ArchSpec(conv_layers=5)) == 11

    @pytest.mark.parametrize("name", list(ArchPreset))
    def test_traced_matches_analytic(self, name):
        """Test that the dependency oracle agrees with the closed form."""
        arch = preset(name, theta=1, in_channels=1)
        assert dependency_receptive_field(arch) == receptive_field(arch)

    def test_traced_pool_free(self):
        """Test the oracle on a plain conv stack."""
        assert dependency_receptive_field(ArchSpec(conv_layers=3)) == 7

    def test_traced_follows_the_built_layers(self):
        """Test that the oracle traces the network it is given, in its layer order."""
        arch = preset(ArchPreset.S4, theta=2, in_channels=1)
        network = build(arch, seed=1)
        assert dependency_receptive_field(arch, network=network) == 16

        names = [layer.name for layer in network.layers]
        assert names == ["conv1", "conv2", "pool1", "conv3", "conv4", "deconv1"]
        network.layers[1], network.layers[2] = network.layers[2], network.layers[1]
        assert dependency_receptive_field(arch, network=network) > 16

        network.layers = [layer for layer in network.layers if layer.name != "conv4"]
        assert dependency_receptive_field(arch, network=network) < 16

    def test_receptive_field_grows_with_pools(self):
        """Test that more pooling widens the context."""
        rows = receptive_field_table()
        assert [row["arch"] for row in rows] == ["s4", "s7", "s9"]
        assert rows[0]["analytic"] < rows[1]["analytic"] < rows[2]["analytic"]
        assert all(row["analytic"] == row["traced"] for row in rows)


class TestSiameseNetwork:
    """Test the feature extractor."""

    @pytest.fixture
    def network(self):
        net = build(preset(ArchPreset.S7, theta=6, in_channels=1), seed=3, dtype=np.float64)
        rng = np.random.default_rng(0)
        net.extract(Tensor(rng.standard_normal((2, 1, 12, 16))), training=True)
        return net

    def test_output_shape_matches_input(self, network):
        """Test theta channels at the input resolution, including padded sizes."""
        image = np.random.default_rng(1).standard_normal((1, 1, 7, 9))
        features = network.extract(image)
        assert features.shape == (1, 6, 7, 9)

    def test_shared_weights(self, network):
        """Test that identical inputs give identical features on both branches."""
        image = np.random.default_rng(2).standard_normal((1, 1, 8, 12))
        model = StereoModel(network, CorrelationMode.INNER, max_disp=3)
        left, right = model.features(image, image.copy())
        np.testing.assert_array_equal(left.data, right.data)

    def test_seed_determinism(self):
        """Test that the same seed gives bitwise-identical parameters."""
        arch = preset(ArchPreset.S4, theta=4, in_channels=1)
        first, second, other = build(arch, seed=5), build(arch, seed=5), build(arch, seed=6)
        for name, tensor in first.parameters().items():
            np.testing.assert_array_equal(tensor.data, second.parameters()[name].data)
        assert not np.array_equal(first.parameters()["conv1.weight"].data, other.parameters()["conv1.weight"].data)

    def test_final_layer_is_linear(self):
        """Test that the last stage has a trainable bias and no batch norm."""
        net = build(preset(ArchPreset.S4, theta=4, in_channels=1))
        params = net.parameters()
        assert "deconv1.bias" in params
        assert "deconv1.bn.gamma" not in params
        assert "conv1.bn.gamma" in params

    def test_too_small_image(self, network):
        """Test that images smaller than the pooling multiple are rejected."""
        with pytest.raises(ShapeError) as excinfo:
            network.extract(np.zeros((1, 1, 3, 16)))
        assert excinfo.value.axis == "rows"

    def test_channel_mismatch(self, network):
        """Test that RGB input into a grayscale network is rejected."""
        with pytest.raises(ShapeError) as excinfo:
            network.extract(np.zeros((1, 3, 8, 8)))
        assert excinfo.value.axis == "channels"

    def test_patch_smaller_than_multiple(self):
        """Test that training patches must survive every pool."""
        with pytest.raises(ConfigurationError):
            build(preset(ArchPreset.S9, theta=4, in_channels=1), patch_size=4)

    def test_inference_without_moments(self):
        """Test that an untrained network cannot run in inference mode."""
        net = build(preset(ArchPreset.S4, theta=4, in_channels=1))
        with pytest.raises(ModelStateError):
            net.extract(np.zeros((1, 1, 4, 4), dtype=np.float32))


class TestCheckpoint:
    """Test SVLT checkpoint persistence."""

    def test_round_trip_inner(self, make_model, tmp_path):
        """Test that parameters, moments and metadata survive save/load."""
        model = make_model(ArchPreset.S7, CorrelationMode.INNER, max_disp=5)
        path = siamese.save(model.checkpoint(), tmp_path / "model.svlt")
        loaded = siamese.load(path)

        assert loaded.network.arch == model.arch
        assert loaded.correlation == CorrelationMode.INNER
        assert loaded.max_disp == 5
        assert loaded.network.dtype == np.float64
        for name, tensor in model.network.parameters().items():
            np.testing.assert_array_equal(loaded.network.parameters()[name].data, tensor.data)
        for name, moments in model.network.buffers().items():
            np.testing.assert_array_equal(loaded.network.buffers()[name].mean, moments.mean)
            np.testing.assert_array_equal(loaded.network.buffers()[name].var, moments.var)

    def test_round_trip_learned_scores(self, make_model, tmp_path):
        """Test that a reloaded learned model scores bitwise identically."""
        model = make_model(ArchPreset.S4, CorrelationMode.LEARNED, max_disp=3)
        path = siamese.save(model.checkpoint(), tmp_path / "learned.svlt")
        restored = StereoModel.from_checkpoint(siamese.load(path))

        rng = np.random.default_rng(4)
        left, right = rng.standard_normal((1, 1, 6, 10)), rng.standard_normal((1, 1, 6, 10))
        before = model.scores(*model.features(left, right))
        after = restored.scores(*restored.features(left, right))
        np.testing.assert_array_equal(before.data, after.data)
        assert restored.head.kernel == 3

    def test_truncated(self, make_model):
        """Test that every truncation is reported as a format error."""
        payload = siamese.dumps(make_model().checkpoint())
        for cut in (2, 10, len(payload) // 2, len(payload) - 1):
            with pytest.raises(FormatError):
                siamese.loads(payload[:cut])

    def test_bad_magic(self, make_model):
        """Test that foreign files are refused."""
        payload = siamese.dumps(make_model().checkpoint())
        with pytest.raises(FormatError):
            siamese.loads(b"XXXX" + payload[4:])

    def test_unsupported_version(self, make_model):
        """Test that a future version is refused."""
        payload = bytearray(siamese.dumps(make_model().checkpoint()))
        payload[4] = 99
        with pytest.raises(FormatError):
            siamese.loads(bytes(payload))

    def test_trailing_bytes(self, make_model):
        """Test that extra data after the last blob is refused."""
        payload = siamese.dumps(make_model().checkpoint())
        with pytest.raises(FormatError):
            siamese.loads(payload + b"\x00")

    def test_missing_file(self, tmp_path):
        """Test that an unreadable path is a format error with the path attached."""
        with pytest.raises(FormatError) as excinfo:
            siamese.load(tmp_path / "absent.svlt")
        assert excinfo.value.path.endswith("absent.svlt")
