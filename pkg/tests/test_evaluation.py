"""
Tests for evaluation, traces, the value-iteration oracle and checkpoints.
"""

import json

import numpy as np
import pytest

from ramp_merge_rl.env.toy_mdp import ToySpeedEnv
from ramp_merge_rl.evaluation.metrics import (
    TRACE_COLUMNS,
    episode_return,
    evaluate,
    rollout,
    trace_episode,
    write_eval_outputs,
    write_trace,
)
from ramp_merge_rl.evaluation.oracle import (
    compare_with_oracle,
    oracle_greedy_action,
    oracle_q_iteration,
    rollout_oracle,
)
from ramp_merge_rl.models.checkpoint import load_checkpoint, save_checkpoint
from ramp_merge_rl.models.qfunction import build_pair
from ramp_merge_rl.utils.common import (
    CheckpointError,
    CheckpointVersionError,
    ConvergenceError,
    UsageError,
    read_csv,
)
from ramp_merge_rl.utils.config import ExperimentConfig, TrainConfig


def toy_setup(seed=0):
    config = ExperimentConfig(train=TrainConfig(environment="toy")).validate()
    return build_pair(1, np.random.default_rng(seed)), config


class TestEpisodeReturn:
    """Test discounted returns."""

    def test_two_blocks(self):
        """Test r1 + gamma * r2."""
        assert episode_return([-1.0, -1.0], 0.5) == pytest.approx(-1.5)

    def test_empty(self):
        """Test that no blocks give zero return."""
        assert episode_return([], 0.95) == 0.0


class TestEvaluate:
    """Test greedy-policy evaluation."""

    def test_zero_episodes(self):
        """Test that an empty evaluation reports None rates."""
        pair, config = toy_setup()
        report = evaluate(pair, 0, seed=0, config=config)
        assert report.episodes == 0
        assert report.success_rate is None
        assert report.mean_return is None

    def test_negative_episodes(self):
        """Test that a negative episode count is rejected."""
        pair, config = toy_setup()
        with pytest.raises(UsageError):
            evaluate(pair, -1, seed=0, config=config)

    def test_toy_report(self):
        """Test that toy episodes all time out after 100 ticks."""
        pair, config = toy_setup()
        report = evaluate(pair, 5, seed=0, config=config)
        assert report.episodes == 5
        assert report.timeouts == 5
        assert report.timeout_rate == 1.0
        assert report.mean_merge_duration_s is None
        assert report.mean_return <= 0.0

    def test_worker_count_does_not_matter(self):
        """Test that threaded evaluation gives the same report."""
        pair, config = toy_setup()
        serial = evaluate(pair, 6, seed=3, config=config, workers=1)
        threaded = evaluate(pair, 6, seed=3, config=config, workers=3)
        assert serial.to_dict() == threaded.to_dict()

    def test_report_file_is_deterministic(self, tmp_path):
        """Test that two evaluations write byte-identical reports."""
        pair, config = toy_setup()
        first = write_eval_outputs(evaluate(pair, 3, seed=1, config=config), str(tmp_path / "a"))
        second = write_eval_outputs(evaluate(pair, 3, seed=1, config=config), str(tmp_path / "b"))
        with open(first, "rb") as f_a, open(second, "rb") as f_b:
            assert f_a.read() == f_b.read()

    def test_merge_episode(self):
        """Test a short merge evaluation end to end."""
        pair = build_pair(6, np.random.default_rng(0))
        report = evaluate(pair, 2, seed=0, config=ExperimentConfig().validate())
        assert report.episodes == 2
        assert report.successes + report.collisions + report.timeouts == 2


class TestTrace:
    """Test merge traces."""

    def test_trace_rows(self, tmp_path):
        """Test that a trace starts at step 0 and has the expected columns."""
        pair = build_pair(6, np.random.default_rng(0))
        rows = trace_episode(pair, seed=0, config=ExperimentConfig().validate())
        assert rows[0]["step"] == 0
        assert any(row["kind"] == "ego" for row in rows)
        path = str(tmp_path / "trace.csv")
        write_trace(rows, path)
        assert list(read_csv(path).columns) == TRACE_COLUMNS

    def test_action_held_for_four_ticks(self):
        """Test that the ego acceleration is constant within every 4-tick block."""
        pair = build_pair(6, np.random.default_rng(1))
        rows = trace_episode(pair, seed=2, config=ExperimentConfig().validate())
        ego = {row["step"]: row["a"] for row in rows if row["kind"] == "ego" and row["step"] > 0}
        blocks = {}
        for step, a in ego.items():
            blocks.setdefault((step - 1) // 4, set()).add(a)
        assert blocks
        assert all(len(values) == 1 for values in blocks.values())

    def test_toy_trace_rejected(self):
        """Test that traces need the merge environment."""
        pair, config = toy_setup()
        with pytest.raises(UsageError):
            trace_episode(pair, seed=0, config=config)


class TestOracle:
    """Test the value-iteration reference."""

    def test_zero_discount_is_immediate_reward(self):
        """Test that gamma=0 converges at once and prefers no acceleration in the speed band."""
        table = oracle_q_iteration(gamma=0.0)
        assert table.iterations <= 2
        assert oracle_greedy_action(table, 27.0) == 0.0

    def test_hold_speed_inside_band(self):
        """Test that the optimal action coasts, since speeding up costs more than the speed penalty saves."""
        table = oracle_q_iteration(gamma=0.95, tol=1e-6)
        assert oracle_greedy_action(table, 27.0) == 0.0
        assert oracle_greedy_action(table, 5.0) == 0.0

    def test_residuals_decrease(self):
        """Test that Bellman residuals never grow."""
        table = oracle_q_iteration(gamma=0.9, tol=1e-6)
        residuals = table.residuals
        assert all(b <= a + 1e-12 for a, b in zip(residuals, residuals[1:]))
        assert table.max_residual < 1e-6

    def test_sweep_budget(self):
        """Test that running out of sweeps raises."""
        with pytest.raises(ConvergenceError):
            oracle_q_iteration(gamma=0.95, max_sweeps=3)

    def test_invalid_gamma(self):
        """Test that gamma must lie in [0, 1)."""
        with pytest.raises(UsageError):
            oracle_q_iteration(gamma=1.0)

    def test_oracle_beats_full_braking(self):
        """Test that the oracle policy outscores always braking."""
        table = oracle_q_iteration(gamma=0.95, tol=1e-6)
        braking = rollout(ToySpeedEnv(), lambda state: -4.5, 0, 4, 0.95).discounted_return
        assert rollout_oracle(table, 0) > braking

    def test_comparison(self):
        """Test the comparison record of a learned policy against the oracle."""
        pair, _ = toy_setup()
        table = oracle_q_iteration(gamma=0.95, tol=1e-6)
        comparison = compare_with_oracle(pair, table, episodes=3)
        assert comparison.episodes == 3
        assert comparison.relative_gap >= 0.0
        assert comparison.oracle_mean_return <= 0.0


class TestCheckpoint:
    """Test checkpoint persistence."""

    def test_round_trip(self, tmp_path):
        """Test that prediction and target survive a save and load."""
        pair = build_pair(6, np.random.default_rng(0))
        pair.target.head_C.layers[1].bias[0] = 3.0
        path = str(tmp_path / "ckpt" / "checkpoint.json")
        save_checkpoint(pair, path)
        loaded = load_checkpoint(path)
        assert loaded.prediction.equals(pair.prediction)
        assert loaded.target.equals(pair.target)

    def test_version_rejected(self, tmp_path):
        """Test that an unknown version is rejected."""
        pair = build_pair(1, np.random.default_rng(0))
        path = tmp_path / "checkpoint.json"
        save_checkpoint(pair, str(path))
        document = json.loads(path.read_text())
        document["version"] = 2
        path.write_text(json.dumps(document))
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(str(path))

    def test_missing_head(self, tmp_path):
        """Test that a checkpoint without every head is rejected."""
        pair = build_pair(1, np.random.default_rng(0))
        path = tmp_path / "checkpoint.json"
        save_checkpoint(pair, str(path))
        document = json.loads(path.read_text())
        del document["heads"]["C_target"]
        path.write_text(json.dumps(document))
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))
