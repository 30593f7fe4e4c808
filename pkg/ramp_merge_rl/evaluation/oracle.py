"""
Brute-force reference for the toy speed MDP: value iteration on a speed x
action grid with linear interpolation between speed bins, plus rollouts that
compare a learned policy with the tabular greedy policy on identical seeds.
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .metrics import greedy_policy, rollout
from ..env.base import A_MAX, A_MIN
from ..env.toy_mdp import TOY_DT, ToySpeedEnv, toy_transition
from ..models.qfunction import QTargetPair
from ..utils.common import ConvergenceError, UsageError
from ..utils.reward import SPEED_LIMIT, RewardWeights

logger = logging.getLogger(__name__)

MAX_SWEEPS = 100_000


@dataclass
class OracleTable:
    v_grid: np.ndarray
    a_grid: np.ndarray
    q: np.ndarray  # (len(v_grid), len(a_grid))
    iterations: int
    max_residual: float
    residuals: List[float] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return self.q.max(axis=1)

    @property
    def greedy_actions(self) -> np.ndarray:
        return self.a_grid[np.argmax(self.q, axis=1)]


def toy_rewards(v_grid: np.ndarray, a_grid: np.ndarray, weights: RewardWeights = RewardWeights(),
                dt: float = TOY_DT):
    """Next speeds and rewards for every (v, a) grid pair."""
    v_next = toy_transition(v_grid[:, None], a_grid[None, :], dt)
    penalty = np.where(v_next < weights.v_lo, (weights.v_lo - v_next) / weights.v_lo,
                       np.where(v_next > weights.v_hi, (v_next - weights.v_hi) / weights.v_hi, 0.0))
    rewards = -weights.w_accel * np.abs(a_grid)[None, :] - weights.w_speed * penalty
    return v_next, rewards


def oracle_q_iteration(v_bins: int = 121, a_bins: int = 29, gamma: float = 0.95, tol: float = 1e-8,
                       weights: RewardWeights = RewardWeights(), max_sweeps: int = MAX_SWEEPS) -> OracleTable:
    """
    Synchronous value iteration Q <- R + gamma * V(v') until the largest
    Bellman residual drops below tol.

    Args:
        v_bins: speed grid points over [0, speed limit]
        a_bins: action grid points over the acceleration range
        gamma: discount factor in [0, 1)
        tol: residual tolerance
        weights: reward weights shared with the merge task
        max_sweeps: sweep budget

    Returns:
        Converged OracleTable with its residual history
    """
    if v_bins < 2 or a_bins < 2:
        raise UsageError("oracle grids need at least 2 bins")
    if not 0.0 <= gamma < 1.0:
        raise UsageError(f"gamma must lie in [0, 1), got {gamma}")
    v_grid = np.linspace(0.0, SPEED_LIMIT, v_bins)
    a_grid = np.linspace(A_MIN, A_MAX, a_bins)
    v_next, rewards = toy_rewards(v_grid, a_grid, weights)

    q = np.zeros((v_bins, a_bins))
    residuals = []
    for sweep in range(1, max_sweeps + 1):
        values = q.max(axis=1)
        q_new = rewards + gamma * np.interp(v_next, v_grid, values)
        residual = float(np.max(np.abs(q_new - q)))
        residuals.append(residual)
        q = q_new
        if residual < tol:
            logger.info(f"Value iteration converged after {sweep} sweeps (residual {residual:.3e})")
            return OracleTable(v_grid, a_grid, q, sweep, residual, residuals)
    raise ConvergenceError(f"value iteration did not converge within {max_sweeps} sweeps "
                           f"(residual {residuals[-1]:.3e})")


def oracle_greedy_action(table: OracleTable, v: float) -> float:
    q_at_v = np.array([np.interp(v, table.v_grid, table.q[:, j]) for j in range(len(table.a_grid))])
    return float(table.a_grid[int(np.argmax(q_at_v))])


def rollout_oracle(table: OracleTable, seed: int, hold_steps: int = 4, gamma: float = 0.95,
                   weights: RewardWeights = RewardWeights()) -> float:
    env = ToySpeedEnv(weights)
    return rollout(env, lambda state: oracle_greedy_action(table, state.v), seed, hold_steps, gamma).discounted_return


@dataclass
class OracleComparison:
    episodes: int
    learned_mean_return: float
    oracle_mean_return: float
    relative_gap: float


def compare_with_oracle(pair: QTargetPair, table: OracleTable, episodes: int = 200, seed: int = 0,
                        gamma: float = 0.95, hold_steps: int = 4,
                        weights: RewardWeights = RewardWeights()) -> OracleComparison:
    """Mean discounted returns of the learned greedy policy and the oracle
    greedy policy on seeds seed .. seed + episodes - 1."""
    if episodes < 1:
        raise UsageError("oracle comparison needs at least one episode")
    policy = greedy_policy(pair)
    learned = [rollout(ToySpeedEnv(weights), policy, seed + i, hold_steps, gamma).discounted_return
               for i in range(episodes)]
    oracle = [rollout_oracle(table, seed + i, hold_steps, gamma, weights) for i in range(episodes)]
    learned_mean, oracle_mean = float(np.mean(learned)), float(np.mean(oracle))
    gap = abs(learned_mean - oracle_mean) / max(abs(oracle_mean), 1e-12)
    logger.info(f"Oracle comparison over {episodes} episodes: learned {learned_mean:.4f}, "
                f"oracle {oracle_mean:.4f}, relative gap {gap:.4f}")
    return OracleComparison(episodes, learned_mean, oracle_mean, gap)
