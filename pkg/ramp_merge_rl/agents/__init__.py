"""
Learning agents: replay memory and the Q-learning trainer.
"""

from .replay import ReplayBuffer, Transition
from .trainer import Trainer, TrainMetrics, EpisodeRecord, explore_action, run_block, sigma_at, train
