"""
Q-learning trainer for the quadratic Q-function: k-step action hold, Gaussian
exploration noise, experience replay and a periodically synced target network.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
import wandb

from .replay import ReplayBuffer, Transition
from ..env.base import A_MAX, A_MIN, BaseEnv, EpisodeStatus, StepResult
from ..env.merge_env import MergeEnv
from ..env.toy_mdp import ToySpeedEnv
from ..models.qfunction import (
    MERGE_STATE_DIM,
    TOY_STATE_DIM,
    NormalizationConstants,
    QTargetPair,
    apply_gradients,
    build_pair,
    loss_and_grads,
    normalize,
    optimal_action,
    sync_target,
)
from ..utils.common import NumericError, derive_seed, make_rng, write_csv
from ..utils.config import ExperimentConfig, TrainConfig

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ["update_index", "env_step", "loss"]
EPISODE_COLUMNS = [
    "episode", "outcome", "steps", "reward_total", "reward_accel", "reward_front", "reward_back",
    "reward_speed", "reward_terminal", "merge_duration_s", "min_front_gap_m", "min_back_gap_m",
    "mean_abs_accel",
]


def make_env(config: ExperimentConfig) -> BaseEnv:
    if config.train.environment == "toy":
        return ToySpeedEnv(config.reward)
    return MergeEnv(config.geometry, config.traffic, config.reward)


def make_constants(config: ExperimentConfig) -> NormalizationConstants:
    geometry = config.geometry
    return NormalizationConstants(speed_scale=geometry.speed_limit, distance_scale=geometry.sensing_range,
                                  merge_point_x=geometry.merge_point_x)


def state_dim_for(config: ExperimentConfig) -> int:
    return TOY_STATE_DIM if config.train.environment == "toy" else MERGE_STATE_DIM


def sigma_at(step: int, config: TrainConfig) -> float:
    """Exploration std: linear decay from sigma_start to sigma_min over
    decay_fraction * total_steps, flat afterwards."""
    if step <= 0:
        return config.sigma_start
    horizon = config.decay_fraction * config.total_steps
    if step >= horizon:
        return config.sigma_min
    return config.sigma_start + (config.sigma_min - config.sigma_start) * (step / horizon)


def explore_action(a_star: float, sigma: float, rng: np.random.Generator,
                   a_min: float = A_MIN, a_max: float = A_MAX) -> float:
    eps = rng.normal(0.0, sigma)
    return float(np.clip(a_star + eps, a_min, a_max))


class BlockResult(NamedTuple):
    reward: float
    observation: object
    terminal: bool
    steps: List[StepResult]
    gaps: List[Tuple[float, float]]


def run_block(env: BaseEnv, a: float, k: int) -> BlockResult:
    """Hold `a` for up to k ticks, stopping early on a terminal tick. The block
    reward is the undiscounted sum of tick rewards and terminal penalties."""
    reward = 0.0
    steps, gaps = [], []
    result = None
    for _ in range(k):
        result = env.step(a)
        reward += result.total
        steps.append(result)
        gaps.append(env.gap_distances())
        if result.terminal:
            break
    observation = result.observation if result is not None else env.observe()
    return BlockResult(reward, observation, bool(result is not None and result.terminal), steps, gaps)


@dataclass
class LossRecord:
    update_index: int
    env_step: int
    loss: float


@dataclass
class EpisodeRecord:
    episode: int
    outcome: str
    steps: int
    reward_total: float
    reward_accel: float
    reward_front: float
    reward_back: float
    reward_speed: float
    reward_terminal: float
    merge_duration_s: float
    min_front_gap_m: float
    min_back_gap_m: float
    mean_abs_accel: float


class EpisodeTracker:
    """Accumulates per-tick results of one episode into an EpisodeRecord."""

    def __init__(self, index: int, dt: float):
        self.index = index
        self.dt = dt
        self.steps = 0
        self.sums = [0.0, 0.0, 0.0, 0.0, 0.0]
        self.abs_accel = 0.0
        self.min_front = math.inf
        self.min_back = math.inf

    def add(self, block: BlockResult, a: float) -> None:
        for result, (d_front, d_back) in zip(block.steps, block.gaps):
            self.steps += 1
            self.sums[0] += result.reward.r_accel
            self.sums[1] += result.reward.r_front
            self.sums[2] += result.reward.r_back
            self.sums[3] += result.reward.r_speed
            self.sums[4] += result.terminal_penalty
            self.abs_accel += abs(a)
            self.min_front = min(self.min_front, d_front)
            self.min_back = min(self.min_back, d_back)

    def finish(self, status: EpisodeStatus) -> EpisodeRecord:
        accel, front, back, speed, terminal = self.sums
        return EpisodeRecord(
            episode=self.index,
            outcome=status.value,
            steps=self.steps,
            reward_total=accel + front + back + speed + terminal,
            reward_accel=accel,
            reward_front=front,
            reward_back=back,
            reward_speed=speed,
            reward_terminal=terminal,
            merge_duration_s=self.steps * self.dt if status == EpisodeStatus.SUCCESS else math.nan,
            min_front_gap_m=self.min_front if math.isfinite(self.min_front) else math.nan,
            min_back_gap_m=self.min_back if math.isfinite(self.min_back) else math.nan,
            mean_abs_accel=self.abs_accel / self.steps if self.steps else math.nan,
        )


@dataclass
class TrainMetrics:
    losses: List[LossRecord] = field(default_factory=list)
    episodes: List[EpisodeRecord] = field(default_factory=list)
    sync_steps: List[int] = field(default_factory=list)
    update_count: int = 0
    transition_count: int = 0
    env_steps: int = 0

    def loss_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(r) for r in self.losses], columns=LOSS_COLUMNS)

    def episode_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(r) for r in self.episodes], columns=EPISODE_COLUMNS)

    def write(self, out_dir: str) -> None:
        write_csv([vars(r) for r in self.losses], f"{out_dir}/loss.csv", LOSS_COLUMNS)
        write_csv([vars(r) for r in self.episodes], f"{out_dir}/episodes.csv", EPISODE_COLUMNS)

    def summary(self, window: int = 100) -> dict:
        """Trend figures: early vs late loss and reward, late outcome rates."""
        summary = {
            "updates": self.update_count,
            "episodes": len(self.episodes),
            "loss_first_decile": None,
            "loss_last_decile": None,
            "reward_first": None,
            "reward_last": None,
            "success_rate_last": None,
            "collision_rate_last": None,
        }
        if self.losses:
            losses = np.array([r.loss for r in self.losses])
            decile = max(1, len(losses) // 10)
            summary["loss_first_decile"] = float(losses[:decile].mean())
            summary["loss_last_decile"] = float(losses[-decile:].mean())
        if self.episodes:
            frame = self.episode_frame()
            first, last = frame.head(window), frame.tail(window)
            summary["reward_first"] = float(first["reward_total"].mean())
            summary["reward_last"] = float(last["reward_total"].mean())
            summary["success_rate_last"] = float((last["outcome"] == EpisodeStatus.SUCCESS.value).mean())
            summary["collision_rate_last"] = float((last["outcome"] == EpisodeStatus.COLLISION.value).mean())
        return summary


class Trainer:
    """
    Runs the training loop for one (config, seed). The run is a pure function
    of the config: network init, exploration, sampling and episode seeds all
    come from one generator seeded with train.seed.

    Args:
        config: validated experiment config
        env: environment override, built from the config when omitted
    """

    def __init__(self, config: ExperimentConfig, env: Optional[BaseEnv] = None):
        self.config = config
        self.train_config = config.train
        self.env = env or make_env(config)
        self.rng = make_rng(self.train_config.seed)
        self.pair: QTargetPair = build_pair(
            state_dim_for(config), self.rng,
            hidden_units=config.net.hidden_units,
            hidden_activation=config.net.hidden_activation,
            a_floor=config.net.a_floor,
            init_action=config.net.init_action,
            constants=make_constants(config),
        )
        self.replay = ReplayBuffer(self.train_config.replay_capacity)
        self.metrics = TrainMetrics()

    def _state(self, observation) -> np.ndarray:
        return normalize(observation, self.pair.prediction.constants)

    def _update(self, env_step: int) -> None:
        tc = self.train_config
        batch = self.replay.sample(tc.batch_size, self.rng)
        loss, grads = loss_and_grads(self.pair, batch, tc.gamma)
        if not math.isfinite(loss):
            raise NumericError(f"non-finite loss {loss}", step=env_step)
        try:
            apply_gradients(self.pair.prediction, grads, tc.lr)
        except NumericError as e:
            raise NumericError(str(e), step=env_step) from e
        self.metrics.update_count += 1
        if self.metrics.update_count % tc.loss_log_stride == 0:
            self.metrics.losses.append(LossRecord(self.metrics.update_count, env_step, loss))
            if tc.use_wandb:
                wandb.log({"loss": loss, "env_step": env_step})

    def train(self) -> Tuple[QTargetPair, TrainMetrics]:
        tc = self.train_config
        env = self.env
        metrics = self.metrics
        if tc.use_wandb:
            wandb.init(project="ramp-merge-rl", name=f"{tc.environment}_seed{tc.seed}",
                       config=self.config.to_dict())

        logger.info(f"Training {tc.environment} for {tc.total_steps} env steps "
                    f"(k={tc.hold_steps}, M={tc.batch_size}, p={tc.sync_every}, gamma={tc.gamma}, lr={tc.lr})")
        env_step = 0
        next_sync = tc.sync_every
        if tc.total_steps > 0:
            env.reset(derive_seed(self.rng))
            s = self._state(env.observe())
            tracker = EpisodeTracker(0, env.dt)

        while env_step < tc.total_steps:
            # blocks never straddle a sync step
            ticks = min(tc.hold_steps, tc.total_steps - env_step, next_sync - env_step)
            a_star = optimal_action(self.pair.prediction, s)
            a = explore_action(a_star, sigma_at(env_step, tc), self.rng, env.a_min, env.a_max)
            block = run_block(env, a, ticks)
            tracker.add(block, a)
            env_step += len(block.steps)

            s_next = self._state(block.observation)
            self.replay.push(Transition(s, a, block.reward, s_next, block.terminal))
            metrics.transition_count += 1
            if len(self.replay) >= tc.batch_size:
                self._update(env_step)

            if env_step == next_sync:
                sync_target(self.pair)
                metrics.sync_steps.append(env_step)
                logger.debug(f"target synced at env step {env_step}")
                next_sync += tc.sync_every

            if block.terminal:
                record = tracker.finish(env.status)
                metrics.episodes.append(record)
                if tc.use_wandb:
                    wandb.log({f"episode/{key}": value for key, value in vars(record).items() if key != "outcome"})
                if len(metrics.episodes) % tc.log_every_episodes == 0:
                    recent = metrics.episodes[-tc.log_every_episodes:]
                    successes = sum(r.outcome == EpisodeStatus.SUCCESS.value for r in recent)
                    logger.info(f"episode {record.episode}, env step {env_step}: "
                                f"{successes}/{len(recent)} recent successes, "
                                f"mean reward {np.mean([r.reward_total for r in recent]):.3f}")
                env.reset(derive_seed(self.rng))
                s = self._state(env.observe())
                tracker = EpisodeTracker(record.episode + 1, env.dt)
            else:
                s = s_next

        metrics.env_steps = env_step
        logger.info(f"Training finished: {metrics.update_count} updates, {len(metrics.episodes)} episodes")
        if tc.use_wandb:
            wandb.finish()
        return self.pair, metrics


def train(config: ExperimentConfig) -> Tuple[QTargetPair, TrainMetrics]:
    return Trainer(config).train()
