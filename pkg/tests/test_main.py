"""
Tests for the command-line entry point.
"""

import json
from unittest import mock

import numpy as np

from ramp_merge_rl.main import main
from ramp_merge_rl.models.checkpoint import save_checkpoint
from ramp_merge_rl.models.qfunction import build_pair


def toy_config_file(tmp_path, total_steps=200):
    path = tmp_path / "toy.json"
    path.write_text(json.dumps({"train": {"total_steps": total_steps, "environment": "toy"}}))
    return str(path)


class TestMain:
    """Test subcommands and exit codes."""

    def test_missing_config(self):
        """Test that train without --config is a usage error."""
        assert main(["train"]) == 1

    def test_unknown_command(self):
        """Test that an unknown subcommand is a usage error."""
        assert main(["fly"]) == 1

    def test_invalid_config(self, tmp_path):
        """Test that an invalid config exits with 1."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"train": {"gamma": 2.0}}))
        assert main(["train", "--config", str(path), "--out", str(tmp_path / "run")]) == 1

    def test_missing_checkpoint(self, tmp_path):
        """Test that an unreadable checkpoint exits with 2."""
        assert main(["eval", "--checkpoint", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2

    def test_gradcheck(self, capsys):
        """Test that the gradient check passes."""
        assert main(["gradcheck", "--trials", "3"]) == 0
        assert "max relative error" in capsys.readouterr().out

    def test_train_writes_outputs(self, tmp_path):
        """Test the files written by train."""
        out = tmp_path / "run"
        assert main(["train", "--config", toy_config_file(tmp_path), "--out", str(out), "--seed", "4"]) == 0
        for name in ("config.json", "loss.csv", "episodes.csv", "checkpoint.json"):
            assert (out / name).exists()
        assert json.loads((out / "config.json").read_text())["train"]["seed"] == 4

    def test_wandb_flag(self, tmp_path):
        """Test that --wandb turns on run tracking."""
        with mock.patch("ramp_merge_rl.agents.trainer.wandb") as fake_wandb:
            assert main(["train", "--config", toy_config_file(tmp_path), "--out", str(tmp_path / "run"),
                         "--wandb"]) == 0
        fake_wandb.init.assert_called_once()
        assert json.loads((tmp_path / "run" / "config.json").read_text())["train"]["use_wandb"] is True

    def test_train_deterministic(self, tmp_path):
        """Test that two runs with the same seed write identical files."""
        config = toy_config_file(tmp_path, total_steps=400)
        for name in ("a", "b"):
            assert main(["train", "--config", config, "--out", str(tmp_path / name)]) == 0
        for name in ("loss.csv", "episodes.csv", "checkpoint.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_eval_is_reproducible(self, tmp_path):
        """Test that eval writes byte-identical reports for the same seed."""
        run = tmp_path / "run"
        assert main(["train", "--config", toy_config_file(tmp_path), "--out", str(run)]) == 0
        checkpoint = str(run / "checkpoint.json")
        for name in ("a", "b"):
            assert main(["eval", "--checkpoint", checkpoint, "--episodes", "3", "--seed", "7",
                         "--out", str(tmp_path / name)]) == 0
        first = (tmp_path / "a" / "eval_report.json").read_bytes()
        assert first == (tmp_path / "b" / "eval_report.json").read_bytes()
        assert json.loads(first)["episodes"] == 3

    def test_oracle_rejects_merge_checkpoint(self, tmp_path):
        """Test that the oracle comparison needs a toy checkpoint."""
        path = str(tmp_path / "merge.json")
        save_checkpoint(build_pair(6, np.random.default_rng(0)), path)
        assert main(["oracle", "--checkpoint", path, "--episodes", "2"]) == 1

    def test_trace(self, tmp_path):
        """Test that trace writes a CSV for a merge checkpoint."""
        checkpoint = str(tmp_path / "merge.json")
        save_checkpoint(build_pair(6, np.random.default_rng(0)), checkpoint)
        out = tmp_path / "trace.csv"
        assert main(["trace", "--checkpoint", checkpoint, "--out", str(out)]) == 0
        assert out.read_text().startswith("step,t,vehicle_id,kind,x,v,a,behavior,status")
