"""
Experiment configuration: one JSON document with the sections env (geometry,
traffic), reward, net and train. Missing keys take their defaults, unknown
keys are rejected.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .common import ConfigError
from .reward import RewardWeights
from ..env.base import A_MAX, A_MIN
from ..env.merge_env import RoadGeometry, TrafficConfig
from ..models.network import ACTIVATIONS

logger = logging.getLogger(__name__)

ENVIRONMENTS = ("merge", "toy")


@dataclass
class NetConfig:
    hidden_units: int = 64
    hidden_activation: str = "tanh"
    a_floor: float = 0.01
    init_action: float = 0.0

    def validate(self) -> "NetConfig":
        if self.hidden_units < 1:
            raise ConfigError("net.hidden_units must be >= 1")
        if self.hidden_activation not in ACTIVATIONS:
            raise ConfigError(f"net.hidden_activation must be one of {ACTIVATIONS}")
        if self.a_floor <= 0:
            raise ConfigError("net.a_floor must be > 0")
        if not A_MIN < self.init_action < A_MAX:
            raise ConfigError(f"net.init_action must lie strictly inside ({A_MIN}, {A_MAX})")
        return self


@dataclass
class TrainConfig:
    """
    Attributes:
        total_steps: environment ticks to train for (N)
        dt: tick length, must equal env.traffic.dt for the merge environment
        hold_steps: ticks each chosen action is held (k)
        batch_size: replay mini-batch size (M)
        sync_every: environment ticks between target syncs (p)
        gamma: discount factor
        lr: SGD learning rate
        sigma_start: initial exploration noise std, m/s^2
        sigma_min: final exploration noise std, m/s^2
        decay_fraction: share of total_steps over which the noise decays
        replay_capacity: replay memory size
        loss_log_stride: record the loss every this many updates
        log_every_episodes: info log cadence for finished episodes
        environment: "merge" or "toy"
        eval_workers: threads used by evaluation
        use_wandb: track the run with wandb
    """
    total_steps: int = 300_000
    dt: float = 0.1
    hold_steps: int = 4
    batch_size: int = 32
    sync_every: int = 500
    gamma: float = 0.95
    lr: float = 0.001
    sigma_start: float = 1.0
    sigma_min: float = 0.05
    decay_fraction: float = 0.7
    seed: int = 0
    replay_capacity: int = 100_000
    loss_log_stride: int = 5
    log_every_episodes: int = 50
    environment: str = "merge"
    eval_workers: int = 1
    use_wandb: bool = False

    def validate(self) -> "TrainConfig":
        if self.total_steps < 0:
            raise ConfigError("train.total_steps must be >= 0")
        if self.hold_steps < 1 or self.sync_every < 1 or self.batch_size < 1:
            raise ConfigError("train.hold_steps, train.sync_every and train.batch_size must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"train.gamma must lie in (0, 1), got {self.gamma}")
        if self.lr <= 0:
            raise ConfigError("train.lr must be > 0")
        if not self.sigma_start >= self.sigma_min >= 0.0:
            raise ConfigError("train requires sigma_start >= sigma_min >= 0")
        if not 0.0 < self.decay_fraction <= 1.0:
            raise ConfigError("train.decay_fraction must lie in (0, 1]")
        if self.seed < 0:
            raise ConfigError("train.seed must be >= 0")
        if self.replay_capacity < self.batch_size:
            raise ConfigError("train.replay_capacity must be at least train.batch_size")
        if self.loss_log_stride < 1 or self.log_every_episodes < 1 or self.eval_workers < 1:
            raise ConfigError("train.loss_log_stride, log_every_episodes and eval_workers must be >= 1")
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"train.environment must be one of {ENVIRONMENTS}, got '{self.environment}'")
        return self


@dataclass
class ExperimentConfig:
    geometry: RoadGeometry = field(default_factory=RoadGeometry)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    reward: RewardWeights = field(default_factory=RewardWeights)
    net: NetConfig = field(default_factory=NetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> "ExperimentConfig":
        self.geometry.validate()
        self.traffic.validate(self.geometry)
        self.reward.validate()
        self.net.validate()
        self.train.validate()
        if self.train.environment == "merge" and abs(self.train.dt - self.traffic.dt) > 1e-12:
            raise ConfigError(f"train.dt ({self.train.dt}) must equal env.traffic.dt ({self.traffic.dt})")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "env": {"geometry": dataclasses.asdict(self.geometry), "traffic": dataclasses.asdict(self.traffic)},
            "reward": dataclasses.asdict(self.reward),
            "net": dataclasses.asdict(self.net),
            "train": dataclasses.asdict(self.train),
        }


def _build(cls, data: Any, prefix: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"'{prefix}' must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key '{prefix}.{unknown[0]}'")
    values = {}
    for key, value in data.items():
        default = known[key].default
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"'{prefix}.{key}' must be a boolean")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"'{prefix}.{key}' must be an integer")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"'{prefix}.{key}' must be a number")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"'{prefix}.{key}' must be a string")
        values[key] = value
    return cls(**values)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("the config document must be a JSON object")
    unknown = sorted(set(data) - {"env", "reward", "net", "train"})
    if unknown:
        raise ConfigError(f"unknown config key '{unknown[0]}'")
    env = data.get("env") or {}
    if not isinstance(env, dict):
        raise ConfigError("'env' must be an object")
    unknown = sorted(set(env) - {"geometry", "traffic"})
    if unknown:
        raise ConfigError(f"unknown config key 'env.{unknown[0]}'")
    config = ExperimentConfig(
        geometry=_build(RoadGeometry, env.get("geometry"), "env.geometry"),
        traffic=_build(TrafficConfig, env.get("traffic"), "env.traffic"),
        reward=_build(RewardWeights, data.get("reward"), "reward"),
        net=_build(NetConfig, data.get("net"), "net"),
        train=_build(TrainConfig, data.get("train"), "train"),
    )
    return config.validate()


def load_config(path: str, seed: Optional[int] = None) -> ExperimentConfig:
    """
    Read and validate a config file.

    Args:
        path: JSON config path
        seed: overrides train.seed when given

    Returns:
        Validated ExperimentConfig
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    config = config_from_dict(data)
    if seed is not None:
        config.train.seed = seed
        config.train.validate()
    logger.info(f"Loaded config from {path} (environment={config.train.environment}, seed={config.train.seed})")
    return config
