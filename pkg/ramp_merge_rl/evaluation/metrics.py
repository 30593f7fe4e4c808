"""
Greedy-policy evaluation, discounted returns and trajectory traces.
"""

import concurrent.futures
import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..agents.trainer import EpisodeRecord, EpisodeTracker, make_env, run_block
from ..env.base import BaseEnv, EpisodeStatus
from ..env.merge_env import MergeEnv
from ..models.qfunction import QTargetPair, normalize, optimal_action
from ..utils.common import UsageError, ensure_dir, write_csv
from ..utils.config import ExperimentConfig

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["step", "t", "vehicle_id", "kind", "x", "v", "a", "behavior", "status"]

Policy = Callable[[object], float]


def episode_return(rewards: Sequence[float], gamma: float) -> float:
    """Discounted return sum_k gamma^(k-1) r_k over block rewards."""
    g = 0.0
    for r in reversed(list(rewards)):
        g = r + gamma * g
    return g


@dataclass
class EpisodeOutcome:
    record: EpisodeRecord
    discounted_return: float
    block_rewards: List[float]


@dataclass
class EvalReport:
    """Aggregate of n greedy episodes. Rates and means are None when nothing
    was run (or, for merge duration, nothing succeeded)."""
    episodes: int
    successes: int
    collisions: int
    timeouts: int
    success_rate: Optional[float]
    collision_rate: Optional[float]
    timeout_rate: Optional[float]
    mean_return: Optional[float]
    std_return: Optional[float]
    mean_merge_duration_s: Optional[float]
    mean_min_front_gap_m: Optional[float]
    mean_min_back_gap_m: Optional[float]
    mean_abs_accel: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def greedy_policy(pair: QTargetPair) -> Policy:
    qnet = pair.prediction
    return lambda observation: optimal_action(qnet, normalize(observation, qnet.constants))


def rollout(env: BaseEnv, policy: Policy, seed: int, hold_steps: int, gamma: float) -> EpisodeOutcome:
    """Run one episode holding each policy action for hold_steps ticks."""
    env.reset(seed)
    tracker = EpisodeTracker(0, env.dt)
    block_rewards = []
    while env.running:
        a = float(np.clip(policy(env.observe()), env.a_min, env.a_max))
        block = run_block(env, a, hold_steps)
        tracker.add(block, a)
        block_rewards.append(block.reward)
    return EpisodeOutcome(tracker.finish(env.status), episode_return(block_rewards, gamma), block_rewards)


def _mean(values: Sequence[float]) -> Optional[float]:
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else None


def aggregate(outcomes: Sequence[EpisodeOutcome]) -> EvalReport:
    n = len(outcomes)
    records = [o.record for o in outcomes]
    counts = {status: sum(r.outcome == status.value for r in records) for status in EpisodeStatus}
    returns = [o.discounted_return for o in outcomes]
    return EvalReport(
        episodes=n,
        successes=counts[EpisodeStatus.SUCCESS],
        collisions=counts[EpisodeStatus.COLLISION],
        timeouts=counts[EpisodeStatus.TIMEOUT],
        success_rate=counts[EpisodeStatus.SUCCESS] / n if n else None,
        collision_rate=counts[EpisodeStatus.COLLISION] / n if n else None,
        timeout_rate=counts[EpisodeStatus.TIMEOUT] / n if n else None,
        mean_return=float(np.mean(returns)) if n else None,
        std_return=float(np.std(returns)) if n else None,
        mean_merge_duration_s=_mean([r.merge_duration_s for r in records]),
        mean_min_front_gap_m=_mean([r.min_front_gap_m for r in records]),
        mean_min_back_gap_m=_mean([r.min_back_gap_m for r in records]),
        mean_abs_accel=_mean([r.mean_abs_accel for r in records]),
    )


def evaluate(pair: QTargetPair, episodes: int, seed: int, config: Optional[ExperimentConfig] = None,
             workers: int = 1) -> EvalReport:
    """
    Evaluate the greedy policy a = B(s) with the k-step hold and no noise.

    Args:
        pair: trained networks (only the prediction network acts)
        episodes: number of episodes; episode i uses seed + i
        seed: base seed
        config: environment and train settings, defaults when omitted
        workers: threads running episodes concurrently

    Returns:
        EvalReport, independent of the worker count
    """
    if episodes < 0:
        raise UsageError(f"episodes must be >= 0, got {episodes}")
    config = config or ExperimentConfig()
    policy = greedy_policy(pair)
    tc = config.train

    def run(index: int) -> EpisodeOutcome:
        return rollout(make_env(config), policy, seed + index, tc.hold_steps, tc.gamma)

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(run, range(episodes)))
    else:
        outcomes = [run(i) for i in range(episodes)]
    report = aggregate(outcomes)
    logger.info(f"Evaluated {episodes} episodes from seed {seed}: success_rate={report.success_rate}, "
                f"collision_rate={report.collision_rate}, mean_return={report.mean_return}")
    return report


def write_report(report: EvalReport, path: str) -> None:
    document = {key: (None if isinstance(value, float) and math.isnan(value) else value)
                for key, value in report.to_dict().items()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, sort_keys=True, indent=2)
        f.write("\n")


def trace_episode(pair: QTargetPair, seed: int, config: Optional[ExperimentConfig] = None) -> List[dict]:
    """Greedy merge episode recorded tick by tick, one row per vehicle,
    starting with the state right after reset."""
    config = config or ExperimentConfig()
    env = make_env(config)
    if not isinstance(env, MergeEnv):
        raise UsageError("traces are only available for the merge environment")
    policy = greedy_policy(pair)
    env.reset(seed)
    rows = env.trace_rows()
    while env.running:
        a = float(np.clip(policy(env.observe()), env.a_min, env.a_max))
        for _ in range(config.train.hold_steps):
            result = env.step(a)
            rows.extend(env.trace_rows())
            if result.terminal:
                break
    return rows


def write_trace(rows: List[dict], path: str) -> None:
    write_csv(rows, path, TRACE_COLUMNS)


def write_eval_outputs(report: EvalReport, out_dir: str) -> str:
    ensure_dir(out_dir)
    path = f"{out_dir}/eval_report.json"
    write_report(report, path)
    return path
