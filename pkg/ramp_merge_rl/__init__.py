"""
ramp_merge_rl: continuous-action Q-learning for highway on-ramp merging.
"""

__version__ = "0.1.0"

from .main import main
