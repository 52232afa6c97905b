"""Tests for the named finite-difference gradient checks."""

import pytest

from stereo.errors import ConfigurationError
from stereo.gradsuite import MODEL_CHECKS, OP_CHECKS, available_checks, run_checks
from stereo.rng import stream


class TestGradientSuite:
    """Test every op check and the small model checks."""

    @pytest.mark.parametrize("name", sorted(OP_CHECKS))
    def test_op_gradients(self, name):
        """Test analytic against central-difference gradients for one op over 20 random draws."""
        (result,) = run_checks([name], seeds=20)
        assert result.name == name and result.seeds == 20
        assert result.passed, f"{name}: worst relative error {result.worst:.3e} at draw {result.worst_draw}"

    @pytest.mark.parametrize("name", ["s4-inner", "s4-learned"])
    def test_small_model_gradients(self, name):
        """Test the full patch loss through the S4 branch and both correlation modes."""
        (result,) = run_checks([name], max_entries=8, seeds=20)
        assert result.passed, f"{name}: worst relative error {result.worst:.3e} at draw {result.worst_draw}"

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["s7-inner", "s7-learned", "s9-inner", "s9-learned"])
    def test_deep_model_gradients(self, name):
        """Test the deeper presets."""
        (result,) = run_checks([name], max_entries=8, seeds=20)
        assert result.passed, f"{name}: worst relative error {result.worst:.3e} at draw {result.worst_draw}"

    def test_shift_invariant_bias_passes(self):
        """Test that the head's output bias, whose true gradient is 0 under the softmax, does not fail."""
        (result,) = run_checks(["s4-learned"], max_entries=4, seeds=20)
        assert result.errors["corr.out.bias"] == 0.0

    def test_catalogue(self):
        """Test that ops come first and every preset/mode pair has a model check."""
        names = available_checks()
        assert names[: len(OP_CHECKS)] == list(OP_CHECKS)
        assert len(MODEL_CHECKS) == 6

    def test_rerun_is_identical(self):
        """Test that a single check replays with the same numbers."""
        first = run_checks(["conv2d", "maxpool2"], seed=3, seeds=4)
        second = run_checks(["maxpool2"], seed=3, seeds=4)
        assert first[1].errors == second[0].errors
        assert first[1].worst_draw == second[0].worst_draw

    def test_draws_vary_shapes(self):
        """Test that repeated draws of one check use different input shapes."""
        index = available_checks().index("conv2d")
        shapes = {OP_CHECKS["conv2d"](stream(0, "gradcheck", index, draw))[0]["x"].shape for draw in range(20)}
        assert len(shapes) > 1

    def test_tolerance_decides(self):
        """Test that a zero tolerance fails every check."""
        (result,) = run_checks(["relu"], tolerance=0.0, seeds=2)
        assert not result.passed

    def test_needs_a_seed(self):
        """Test that zero draws are refused."""
        with pytest.raises(ConfigurationError):
            run_checks(["relu"], seeds=0)

    def test_unknown_name(self):
        """Test that misspelt checks are refused."""
        with pytest.raises(KeyError):
            run_checks(["conv3d"])
