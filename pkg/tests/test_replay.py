"""
Tests for the replay buffer.
"""

import numpy as np
import pytest
from scipy.stats import chisquare

from ramp_merge_rl.agents.replay import ReplayBuffer, Transition
from ramp_merge_rl.utils.common import InsufficientDataError, UsageError


def transition(tag, r=-1.0, a=0.0):
    return Transition(s=np.array([float(tag)]), a=a, r=r, s_next=np.array([float(tag) + 1.0]), terminal=False)


class TestTransition:
    """Test transition validation."""

    def test_valid(self):
        """Test that a well-formed transition validates."""
        transition(0).validate()

    @pytest.mark.parametrize("kwargs", [{"a": 3.0}, {"a": -5.0}, {"r": 0.5}, {"r": float("nan")}])
    def test_invalid(self, kwargs):
        """Test out-of-range actions and positive or non-finite rewards."""
        with pytest.raises(UsageError):
            transition(0, **kwargs).validate()

    def test_non_finite_state(self):
        """Test that non-finite states are rejected."""
        bad = Transition(s=np.array([np.inf]), a=0.0, r=-1.0, s_next=np.array([0.0]), terminal=True)
        with pytest.raises(UsageError):
            bad.validate()


class TestReplayBuffer:
    """Test ring behaviour and sampling."""

    def test_invalid_capacity(self):
        """Test that the capacity must be positive."""
        with pytest.raises(UsageError):
            ReplayBuffer(0)

    def test_fifo_eviction(self):
        """Test that a full buffer keeps the newest transitions, oldest first."""
        buffer = ReplayBuffer(capacity=3)
        for i in range(5):
            buffer.push(transition(i))
        assert len(buffer) == 3
        assert [t.s[0] for t in buffer.items()] == [2.0, 3.0, 4.0]

    def test_capacity_two(self):
        """Test eviction order on a two-slot buffer."""
        buffer = ReplayBuffer(capacity=2)
        buffer.push(transition(0))
        buffer.push(transition(1))
        assert [t.s[0] for t in buffer.items()] == [0.0, 1.0]
        buffer.push(transition(2))
        assert [t.s[0] for t in buffer.items()] == [1.0, 2.0]
        buffer.push(transition(3))
        assert [t.s[0] for t in buffer.items()] == [2.0, 3.0]

    def test_count_bounded(self):
        """Test that the count never exceeds the capacity."""
        buffer = ReplayBuffer(capacity=10)
        for i in range(25):
            buffer.push(transition(i))
            assert buffer.count == min(i + 1, 10)

    def test_insufficient_data(self):
        """Test that sampling more than is held raises."""
        buffer = ReplayBuffer(capacity=10)
        for i in range(3):
            buffer.push(transition(i))
        with pytest.raises(InsufficientDataError):
            buffer.sample(4, np.random.default_rng(0))

    def test_sample_size_and_membership(self):
        """Test that samples come from the stored transitions."""
        buffer = ReplayBuffer(capacity=40)
        for i in range(40):
            buffer.push(transition(i))
        batch = buffer.sample(32, np.random.default_rng(0))
        assert len(batch) == 32
        stored = {id(t) for t in buffer.items()}
        assert all(id(t) in stored for t in batch)

    def test_sampling_deterministic(self):
        """Test that the same generator seed gives the same batch."""
        buffer = ReplayBuffer(capacity=10)
        for i in range(10):
            buffer.push(transition(i))
        a = buffer.sample(10, np.random.default_rng(5))
        b = buffer.sample(10, np.random.default_rng(5))
        assert [t.s[0] for t in a] == [t.s[0] for t in b]

    def test_sampling_uniform(self):
        """Test uniform sampling with a chi-square test."""
        buffer = ReplayBuffer(capacity=10)
        for i in range(10):
            buffer.push(transition(i))
        rng = np.random.default_rng(11)
        counts = np.zeros(10)
        for _ in range(10000):
            for t in buffer.sample(10, rng):
                counts[int(t.s[0])] += 1
        assert chisquare(counts).pvalue > 0.001
