"""
Tests for configuration loading and validation.
"""

import json
import os

import pytest

from ramp_merge_rl.env.merge_env import TrafficConfig
from ramp_merge_rl.utils.common import ConfigError
from ramp_merge_rl.utils.config import ExperimentConfig, config_from_dict, load_config

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def write_config(tmp_path, document):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document))
    return str(path)


class TestConfig:
    """Test the JSON config layer."""

    def test_empty_document_gives_defaults(self):
        """Test that every section falls back to its defaults."""
        config = config_from_dict({})
        assert config.train.hold_steps == 4
        assert config.train.batch_size == 32
        assert config.train.sync_every == 500
        assert config.train.gamma == 0.95
        assert config.train.lr == 0.001
        assert config.net.hidden_units == 64

    def test_partial_override(self):
        """Test that given keys override and the rest keep defaults."""
        config = config_from_dict({"train": {"gamma": 0.9}, "env": {"traffic": {"p_coop": 0.5}}})
        assert config.train.gamma == 0.9
        assert config.traffic.p_coop == 0.5
        assert config.train.hold_steps == 4

    @pytest.mark.parametrize("document", [
        {"training": {}},
        {"train": {"gamma_typo": 0.9}},
        {"env": {"road": {}}},
        {"env": {"traffic": {"unknown": 1}}},
    ])
    def test_unknown_keys(self, document):
        """Test that unknown keys are rejected."""
        with pytest.raises(ConfigError):
            config_from_dict(document)

    @pytest.mark.parametrize("document", [
        {"train": {"gamma": 1.0}},
        {"train": {"hold_steps": 0}},
        {"train": {"hold_steps": 2.5}},
        {"train": {"environment": "highway"}},
        {"train": {"dt": 0.2}},
        {"net": {"hidden_activation": "gelu"}},
        {"net": {"init_action": 2.5}},
    ])
    def test_invalid_values(self, document):
        """Test that out-of-range or mistyped values are rejected."""
        with pytest.raises(ConfigError):
            config_from_dict(document)

    def test_integer_accepted_for_float(self):
        """Test that an integer literal is accepted for a float field."""
        config = config_from_dict({"train": {"sigma_start": 1}})
        assert config.train.sigma_start == 1.0
        assert isinstance(config.train.sigma_start, float)

    def test_load_with_seed_override(self, tmp_path):
        """Test that the seed argument overrides train.seed."""
        path = write_config(tmp_path, {"train": {"seed": 3}})
        assert load_config(path).train.seed == 3
        assert load_config(path, seed=11).train.seed == 11

    def test_negative_seed_override(self, tmp_path):
        """Test that a negative seed override is rejected."""
        path = write_config(tmp_path, {})
        with pytest.raises(ConfigError):
            load_config(path, seed=-1)

    def test_invalid_json(self, tmp_path):
        """Test that malformed JSON is a config error."""
        path = tmp_path / "config.json"
        path.write_text("{")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_to_dict_round_trip(self):
        """Test that a config rebuilt from its dict is identical."""
        config = config_from_dict({"train": {"seed": 5, "environment": "toy"}})
        assert config_from_dict(config.to_dict()) == config

    def test_shipped_configs(self):
        """Test that the configs in the repository load."""
        assert load_config(os.path.join(CONFIG_DIR, "default.json")).train.environment == "merge"
        assert load_config(os.path.join(CONFIG_DIR, "toy.json")).train.environment == "toy"
        assert isinstance(ExperimentConfig().validate(), ExperimentConfig)

    def test_toy_config_replay_window(self):
        """Test that the toy config replays only the late, low-noise part of its run."""
        train = load_config(os.path.join(CONFIG_DIR, "toy.json")).train
        transitions = train.total_steps // train.hold_steps
        decay_end = int(train.decay_fraction * train.total_steps) // train.hold_steps
        assert train.replay_capacity <= transitions - decay_end

    def test_merge_config_collision_cost(self):
        """Test that the shipped merge config makes a collision costlier than the defaults and a timeout."""
        traffic = load_config(os.path.join(CONFIG_DIR, "default.json")).traffic
        assert traffic.collision_penalty == -50.0
        assert traffic.collision_penalty < TrafficConfig().collision_penalty
        assert traffic.collision_penalty < traffic.timeout_penalty
