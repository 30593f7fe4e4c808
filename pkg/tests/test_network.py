"""
Tests for the numpy network: initialization, forward/backward and persistence.
"""

import json

import numpy as np
import pytest

from ramp_merge_rl.models.network import (
    Gradients,
    Layer,
    LayerSpec,
    NetParams,
    backward,
    forward,
    init,
    load_params,
    save_params,
    sgd_step,
)
from ramp_merge_rl.utils.common import (
    CheckpointError,
    CheckpointShapeError,
    CheckpointVersionError,
    ConfigError,
    NumericError,
    UsageError,
)


def small_specs():
    return [LayerSpec(6, 64, "tanh"), LayerSpec(64, 3, "identity")]


def zero_params(specs):
    return NetParams([Layer(spec, np.zeros((spec.output_dim, spec.input_dim)), np.zeros(spec.output_dim))
                      for spec in specs])


class TestInit:
    """Test parameter initialization."""

    def test_glorot_bound_and_zero_bias(self):
        """Test that weights lie in the Glorot bound and biases start at zero."""
        params = init(small_specs(), np.random.default_rng(0))
        limit = np.sqrt(6.0 / 70.0)
        assert limit == pytest.approx(0.2928, abs=1e-4)
        assert np.all(np.abs(params.layers[0].weights) <= limit)
        assert params.layers[0].weights.shape == (64, 6)
        assert np.all(params.layers[0].bias == 0.0)
        assert np.all(params.layers[1].bias == 0.0)

    def test_deterministic(self):
        """Test that the same seed gives identical parameters."""
        a = init(small_specs(), np.random.default_rng(7))
        b = init(small_specs(), np.random.default_rng(7))
        assert a.equals(b)

    def test_incompatible_layers(self):
        """Test that chained dims must agree."""
        with pytest.raises(ConfigError):
            init([LayerSpec(6, 64), LayerSpec(32, 3)], np.random.default_rng(0))

    def test_unknown_activation(self):
        """Test that unknown activations are rejected."""
        with pytest.raises(ConfigError):
            init([LayerSpec(6, 3, "swish")], np.random.default_rng(0))


class TestForwardBackward:
    """Test forward and reverse passes."""

    def test_zero_params_output(self):
        """Test that all-zero parameters give zero outputs and zero input gradient."""
        params = zero_params(small_specs())
        y, cache = forward(params, np.ones(6))
        assert np.array_equal(y, np.zeros(3))
        grads, dx = backward(params, cache, np.ones(3))
        assert np.array_equal(dx, np.zeros(6))
        assert np.array_equal(grads.biases[1], np.ones(3))

    def test_batch_matches_rows(self):
        """Test that a batch forward equals row-by-row forwards."""
        params = init(small_specs(), np.random.default_rng(1))
        x = np.random.default_rng(2).normal(size=(5, 6))
        y, _ = forward(params, x)
        for i in range(5):
            row, _ = forward(params, x[i])
            assert np.allclose(y[i], row)

    def test_batch_gradients_are_summed(self):
        """Test that batch gradients equal the sum of per-row gradients."""
        params = init(small_specs(), np.random.default_rng(1))
        x = np.random.default_rng(3).normal(size=(4, 6))
        upstream = np.random.default_rng(4).normal(size=(4, 3))
        _, cache = forward(params, x)
        batch_grads, _ = backward(params, cache, upstream)
        total = Gradients.zeros_like(params)
        for i in range(4):
            _, row_cache = forward(params, x[i])
            row_grads, _ = backward(params, row_cache, upstream[i])
            total = total + row_grads
        assert np.allclose(batch_grads.flat(), total.flat())

    def test_finite_difference(self):
        """Test the reverse pass against central differences for every activation."""
        rng = np.random.default_rng(5)
        for activation in ("tanh", "sigmoid", "softplus", "identity"):
            specs = [LayerSpec(3, 4, activation), LayerSpec(4, 2, "identity")]
            params = init(specs, rng)
            for layer in params.layers:
                layer.bias[:] = rng.normal(size=layer.bias.shape)
            x = rng.normal(size=3)
            upstream = rng.normal(size=2)
            _, cache = forward(params, x)
            grads, dx = backward(params, cache, upstream)

            eps = 1e-6
            for j in range(3):
                shift = np.zeros(3)
                shift[j] = eps
                numeric = (forward(params, x + shift)[0] - forward(params, x - shift)[0]) @ upstream / (2 * eps)
                assert dx[j] == pytest.approx(numeric, rel=1e-5, abs=1e-8)
            w = params.layers[0].weights
            original = w[1, 2]
            w[1, 2] = original + eps
            up = forward(params, x)[0] @ upstream
            w[1, 2] = original - eps
            down = forward(params, x)[0] @ upstream
            w[1, 2] = original
            assert grads.weights[0][1, 2] == pytest.approx((up - down) / (2 * eps), rel=1e-5, abs=1e-8)

    def test_wrong_input_width(self):
        """Test that a wrong input width is a usage error."""
        params = init(small_specs(), np.random.default_rng(0))
        with pytest.raises(UsageError):
            forward(params, np.ones(5))

    def test_stale_cache(self):
        """Test that backward refuses a cache from before an update."""
        params = init(small_specs(), np.random.default_rng(0))
        _, cache = forward(params, np.ones(6))
        grads, _ = backward(params, cache, np.ones(3))
        sgd_step(params, grads, 0.01)
        with pytest.raises(UsageError):
            backward(params, cache, np.ones(3))

    def test_cache_from_other_params(self):
        """Test that backward refuses a cache produced by other parameters."""
        params = init(small_specs(), np.random.default_rng(0))
        other = params.copy()
        _, cache = forward(other, np.ones(6))
        with pytest.raises(UsageError):
            backward(params, cache, np.ones(3))


class TestSgdStep:
    """Test the plain gradient step."""

    def test_update(self):
        """Test w <- w - lr * g on a single weight."""
        spec = LayerSpec(1, 1, "identity")
        params = NetParams([Layer(spec, np.array([[1.0]]), np.array([0.0]))])
        sgd_step(params, Gradients([np.array([[2.0]])], [np.array([0.0])]), 0.001)
        assert params.layers[0].weights[0, 0] == pytest.approx(0.998)
        assert params.version == 1

    def test_non_finite_rejected(self):
        """Test that non-finite gradients leave parameters untouched."""
        spec = LayerSpec(1, 1, "identity")
        params = NetParams([Layer(spec, np.array([[1.0]]), np.array([0.0]))])
        with pytest.raises(NumericError):
            sgd_step(params, Gradients([np.array([[np.nan]])], [np.array([0.0])]), 0.001)
        assert params.layers[0].weights[0, 0] == 1.0
        assert params.version == 0


class TestPersistence:
    """Test saving and loading parameters."""

    def test_round_trip(self, tmp_path):
        """Test that saved parameters load back bit-identical."""
        params = init(small_specs(), np.random.default_rng(3))
        path = str(tmp_path / "net.json")
        save_params(params, path)
        loaded = load_params(path)
        assert loaded.equals(params)
        x = np.random.default_rng(4).normal(size=6)
        assert np.array_equal(forward(loaded, x)[0], forward(params, x)[0])

    def test_wrong_version(self, tmp_path):
        """Test that an unknown format version is rejected."""
        params = init(small_specs(), np.random.default_rng(3))
        path = tmp_path / "net.json"
        save_params(params, str(path))
        document = json.loads(path.read_text())
        document["version"] = 99
        path.write_text(json.dumps(document))
        with pytest.raises(CheckpointVersionError):
            load_params(str(path))

    def test_truncated_weights(self, tmp_path):
        """Test that a weight list of the wrong length is a shape error."""
        params = init(small_specs(), np.random.default_rng(3))
        path = tmp_path / "net.json"
        save_params(params, str(path))
        document = json.loads(path.read_text())
        document["layers"][0]["weights"] = document["layers"][0]["weights"][:-1]
        path.write_text(json.dumps(document))
        with pytest.raises(CheckpointShapeError):
            load_params(str(path))

    def test_invalid_json(self, tmp_path):
        """Test that a file that is not JSON is a checkpoint error."""
        path = tmp_path / "net.json"
        path.write_text("{not json")
        with pytest.raises(CheckpointError):
            load_params(str(path))
