"""
Utility modules: errors, seeding, CSV I/O, the reward model and configuration.
"""

from .common import (
    MergeRLError,
    ConfigError,
    UsageError,
    InsufficientDataError,
    NumericError,
    ConvergenceError,
    CheckpointError,
    CheckpointVersionError,
    CheckpointShapeError,
)
