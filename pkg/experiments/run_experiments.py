"""
Script to run the multi-seed ramp merging experiments: the training trend on
the merge task, the toy-MDP oracle comparison and a determinism check.
"""

import argparse
import filecmp
import json
import os
import subprocess
import sys
from typing import List

import pandas as pd

DETERMINISM_FILES = ["loss.csv", "episodes.csv", "checkpoint.json"]


def run_command(cmd: List[str], description: str = ""):
    """Run a command and handle errors."""
    print(f"Running: {description}")
    print(f"Command: {' '.join(cmd)}")

    try:
        result = subprocess.run(cmd, check=True, capture_output=True, text=True)
        print(f"Success: {description}")
        return result
    except subprocess.CalledProcessError as e:
        print(f"Error running {description}: {e}")
        print(f"stderr: {e.stderr}")
        return None


def train_command(config: str, out_dir: str, seed: int, wandb: bool = False) -> List[str]:
    cmd = [
        sys.executable, "-m", "ramp_merge_rl.main",
        "train",
        "--config", config,
        "--out", out_dir,
        "--seed", str(seed),
    ]
    if wandb:
        cmd.append("--wandb")
    return cmd


def run_summary(out_dir: str, window: int = 100) -> dict:
    """Trend figures of one finished run, read back from its CSV outputs."""
    losses = pd.read_csv(os.path.join(out_dir, "loss.csv"))
    episodes = pd.read_csv(os.path.join(out_dir, "episodes.csv"))
    decile = max(1, len(losses) // 10)
    last = episodes.tail(window)
    return {
        "loss_first_decile": losses["loss"].head(decile).mean(),
        "loss_last_decile": losses["loss"].tail(decile).mean(),
        "reward_first": episodes["reward_total"].head(window).mean(),
        "reward_last": last["reward_total"].mean(),
        "success_rate_last": (last["outcome"] == "success").mean(),
        "collision_rate_last": (last["outcome"] == "collision").mean(),
        "episodes": len(episodes),
    }


def trend_experiment(args):
    """Train the merge task on several seeds and check the median trends."""
    rows = []
    for seed in args.seeds:
        out_dir = os.path.join(args.out, f"trend_seed{seed}")
        if run_command(train_command(args.config, out_dir, seed, args.wandb), f"Merge training - seed {seed}") is None:
            continue
        summary = run_summary(out_dir)
        summary["seed"] = seed
        rows.append(summary)
    if not rows:
        print("No successful runs")
        return None

    frame = pd.DataFrame(rows)
    frame.to_csv(os.path.join(args.out, "trend_summary.csv"), index=False)
    median = frame.median(numeric_only=True)
    checks = {
        "loss_decreases": median["loss_last_decile"] < 0.5 * median["loss_first_decile"],
        "reward_increases": median["reward_last"] > median["reward_first"],
        "success_rate": median["success_rate_last"] >= 0.8,
        "collision_rate": median["collision_rate_last"] <= 0.1,
    }
    print(frame.to_string(index=False))
    for name, passed in checks.items():
        print(f"{name}: {'PASS' if passed else 'FAIL'}")
    return checks


def oracle_experiment(args):
    """Train on the toy MDP and compare against value iteration."""
    cmd = [
        sys.executable, "-m", "ramp_merge_rl.main",
        "oracle",
        "--config", args.toy_config,
        "--steps", str(args.oracle_steps),
        "--episodes", str(args.oracle_episodes),
        "--seed", str(args.seeds[0]),
    ]
    result = run_command(cmd, "Toy MDP oracle comparison")
    if result is not None:
        print(result.stdout)
    return result


def determinism_experiment(args):
    """Run the same (config, seed) twice and compare output files byte for byte."""
    seed = args.seeds[0]
    dirs = [os.path.join(args.out, f"determinism_{i}") for i in range(2)]
    for i, out_dir in enumerate(dirs):
        if run_command(train_command(args.config, out_dir, seed), f"Determinism run {i + 1}") is None:
            return False
    identical = {name: filecmp.cmp(os.path.join(dirs[0], name), os.path.join(dirs[1], name), shallow=False)
                 for name in DETERMINISM_FILES}
    print(json.dumps(identical, indent=2))
    return all(identical.values())


def main():
    """Main experiment runner."""
    parser = argparse.ArgumentParser(description="Run ramp merging experiments")

    parser.add_argument("--experiment", type=str, default="all",
                        choices=["trend", "oracle", "determinism", "all"],
                        help="Which experiment to run")
    parser.add_argument("--config", type=str, default="configs/default.json",
                        help="Config file for merge training")
    parser.add_argument("--toy-config", type=str, default="configs/toy.json",
                        help="Config file for the toy MDP oracle comparison")
    parser.add_argument("--out", type=str, default="runs/experiments",
                        help="Output root directory")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2],
                        help="Training seeds")
    parser.add_argument("--oracle-steps", type=int, default=100_000,
                        help="Toy MDP training steps")
    parser.add_argument("--oracle-episodes", type=int, default=200,
                        help="Evaluation episodes for the oracle comparison")
    parser.add_argument("--wandb", action="store_true",
                        help="Enable WandB logging")

    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    if args.experiment == "trend" or args.experiment == "all":
        trend_experiment(args)
    if args.experiment == "oracle" or args.experiment == "all":
        oracle_experiment(args)
    if args.experiment == "determinism" or args.experiment == "all":
        determinism_experiment(args)

    print("Experiments completed!")


if __name__ == "__main__":
    main()
