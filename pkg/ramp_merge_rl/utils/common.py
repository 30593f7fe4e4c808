"""
Shared helpers: the package exception hierarchy, seeded RNG construction
and CSV I/O.
"""

import logging
import os
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class MergeRLError(Exception):
    """Base class for every error raised by ramp_merge_rl."""


class ConfigError(MergeRLError, ValueError):
    """Invalid configuration value or configuration file."""


class UsageError(MergeRLError, ValueError):
    """An API was called outside its contract."""


class InsufficientDataError(MergeRLError):
    """The replay memory holds fewer transitions than requested."""


class NumericError(MergeRLError, ArithmeticError):
    """A non-finite value reached the parameters or the loss."""

    def __init__(self, message: str, step: Optional[int] = None):
        if step is not None:
            message = f"{message} (env step {step})"
        super().__init__(message)
        self.step = step


class ConvergenceError(MergeRLError, RuntimeError):
    """An iterative solver did not reach its tolerance."""


class CheckpointError(MergeRLError, ValueError):
    """A checkpoint could not be read."""


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    if seed is None or int(seed) < 0:
        raise UsageError(f"seed must be a non-negative integer, got {seed}")
    return np.random.default_rng(int(seed))


def derive_seed(rng: np.random.Generator) -> int:
    """Draw a child seed from a parent generator."""
    return int(rng.integers(0, 2**32 - 1))


def ensure_dir(path: str) -> str:
    if path and not os.path.exists(path):
        os.makedirs(path)
    return path


def write_csv(rows: Sequence[dict], path: str, columns: List[str]) -> pd.DataFrame:
    """Write rows to CSV with a fixed column order; returns the frame written."""
    frame = pd.DataFrame(list(rows), columns=columns)
    directory = os.path.dirname(path)
    if directory:
        ensure_dir(directory)
    frame.to_csv(path, index=False)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return frame


def read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path)
