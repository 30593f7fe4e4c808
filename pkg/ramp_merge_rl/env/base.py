"""
Base class for environments driven by the trainer and the evaluator.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Tuple

from ..utils.common import UsageError
from ..utils.reward import RewardBreakdown

A_MIN = -4.5
A_MAX = 2.5


class EpisodeStatus(Enum):
    RUNNING = "running"
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class StepResult:
    observation: Any
    reward: RewardBreakdown
    terminal: bool
    status: EpisodeStatus
    terminal_penalty: float = 0.0

    @property
    def total(self) -> float:
        return self.reward.total + self.terminal_penalty


class BaseEnv(ABC):
    """Common contract of the merge simulator and the toy speed MDP."""

    a_min: float = A_MIN
    a_max: float = A_MAX
    dt: float = 0.1

    @abstractmethod
    def reset(self, seed: int) -> Any:
        """
        Start a new episode.

        Args:
            seed: non-negative integer seed; identical seeds give identical episodes

        Returns:
            The environment's initial state snapshot
        """
        pass

    @abstractmethod
    def observe(self) -> Any:
        """Return the current observation (raw, not normalized)."""
        pass

    @abstractmethod
    def step(self, action: float) -> StepResult:
        """Advance one dt tick under the given acceleration."""
        pass

    @property
    @abstractmethod
    def status(self) -> EpisodeStatus:
        pass

    @property
    def running(self) -> bool:
        return self.status == EpisodeStatus.RUNNING

    def _check_action(self, action: float) -> None:
        if not self.running:
            raise UsageError(f"step() called on a finished episode (status {self.status.value})")
        if not (self.a_min <= action <= self.a_max):
            raise UsageError(f"acceleration {action} outside [{self.a_min}, {self.a_max}]")

    def gap_distances(self) -> Tuple[float, float]:
        """Bumper gaps to the gap-front and gap-back vehicles; NaN where the
        environment has no neighbors."""
        return float("nan"), float("nan")
