"""
Fixed-capacity experience replay with uniform sampling.
"""

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from ..env.base import A_MAX, A_MIN
from ..utils.common import InsufficientDataError, UsageError


@dataclass(frozen=True, eq=False)
class Transition:
    s: np.ndarray
    a: float
    r: float
    s_next: np.ndarray
    terminal: bool

    def validate(self) -> "Transition":
        if not (A_MIN <= self.a <= A_MAX):
            raise UsageError(f"transition action {self.a} outside [{A_MIN}, {A_MAX}]")
        if not math.isfinite(self.r) or self.r > 0.0:
            raise UsageError(f"transition reward must be finite and <= 0, got {self.r}")
        if not (np.all(np.isfinite(self.s)) and np.all(np.isfinite(self.s_next))):
            raise UsageError("transition states must be finite")
        if np.shape(self.s) != np.shape(self.s_next):
            raise UsageError("transition states have different shapes")
        return self


class ReplayBuffer:
    """
    Ring buffer of transitions. When full, the oldest entry is overwritten.

    Args:
        capacity: maximum number of transitions held
    """

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise UsageError(f"replay capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._memory: List[Transition] = []
        self._next_index = 0

    def __len__(self) -> int:
        return len(self._memory)

    @property
    def count(self) -> int:
        return len(self._memory)

    def push(self, transition: Transition) -> None:
        transition.validate()
        if len(self._memory) < self.capacity:
            self._memory.append(transition)
        else:
            self._memory[self._next_index] = transition
        self._next_index = (self._next_index + 1) % self.capacity

    def items(self) -> List[Transition]:
        """Stored transitions, oldest first."""
        if len(self._memory) < self.capacity:
            return list(self._memory)
        return self._memory[self._next_index:] + self._memory[:self._next_index]

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """Uniform draws with replacement."""
        if batch_size < 1:
            raise UsageError(f"batch size must be >= 1, got {batch_size}")
        if len(self._memory) < batch_size:
            raise InsufficientDataError(f"replay holds {len(self._memory)} transitions, {batch_size} requested")
        indices = rng.integers(0, len(self._memory), size=batch_size)
        return [self._memory[i] for i in indices]
