"""
One-dimensional speed-tracking MDP with the same action range and speed
penalty as the merge task. Small enough to solve exactly by value iteration.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .base import BaseEnv, EpisodeStatus, StepResult
from ..utils.common import make_rng
from ..utils.reward import SPEED_LIMIT, RewardBreakdown, RewardWeights, r_accel, r_speed

TOY_EPISODE_STEPS = 100
TOY_DT = 0.1


@dataclass(frozen=True)
class ToyMdpState:
    v: float
    step_index: int = 0


def toy_reset(seed: int) -> ToyMdpState:
    rng = make_rng(seed)
    return ToyMdpState(v=float(rng.uniform(0.0, SPEED_LIMIT)), step_index=0)


def toy_reward(a: float, v_next: float, weights: RewardWeights = RewardWeights()) -> RewardBreakdown:
    return RewardBreakdown(r_accel=r_accel(a, weights), r_front=0.0, r_back=0.0, r_speed=r_speed(v_next, weights))


def toy_transition(v, a, dt: float = TOY_DT):
    """Deterministic speed update; works elementwise on arrays."""
    return np.clip(v + a * dt, 0.0, SPEED_LIMIT)


def toy_step(state: ToyMdpState, a: float, weights: RewardWeights = RewardWeights(),
             dt: float = TOY_DT) -> Tuple[ToyMdpState, float, bool]:
    v_next = float(toy_transition(state.v, a, dt))
    reward = toy_reward(a, v_next, weights).total
    next_state = ToyMdpState(v=v_next, step_index=state.step_index + 1)
    return next_state, reward, next_state.step_index >= TOY_EPISODE_STEPS


class ToySpeedEnv(BaseEnv):
    """BaseEnv wrapper over toy_reset/toy_step. The step limit (100 by default)
    ends the episode as a Timeout without a penalty."""

    def __init__(self, reward_weights: Optional[RewardWeights] = None, episode_steps: int = TOY_EPISODE_STEPS):
        self.episode_steps = episode_steps
        self.reward_weights = (reward_weights or RewardWeights()).validate()
        self.dt = TOY_DT
        self.state: Optional[ToyMdpState] = None
        self._status = EpisodeStatus.TIMEOUT

    @property
    def status(self) -> EpisodeStatus:
        return self._status

    def reset(self, seed: int) -> ToyMdpState:
        self.state = toy_reset(seed)
        self._status = EpisodeStatus.RUNNING
        return self.state

    def observe(self) -> ToyMdpState:
        return self.state

    def step(self, action: float) -> StepResult:
        self._check_action(action)
        v_next = float(toy_transition(self.state.v, action, self.dt))
        reward = toy_reward(action, v_next, self.reward_weights)
        self.state = ToyMdpState(v=v_next, step_index=self.state.step_index + 1)
        if self.state.step_index >= self.episode_steps:
            self._status = EpisodeStatus.TIMEOUT
        return StepResult(observation=self.state, reward=reward, terminal=not self.running, status=self._status)
