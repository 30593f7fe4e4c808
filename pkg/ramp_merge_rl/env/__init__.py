"""
Simulation environments: the on-ramp merge scenario and the toy speed MDP.
"""

from .base import A_MAX, A_MIN, BaseEnv, EpisodeStatus, StepResult
from .merge_env import (
    Behavior,
    MergeEnv,
    Observation,
    RoadGeometry,
    TrafficConfig,
    Vehicle,
    VehicleKind,
    WorldState,
    assign_behavior,
    observe,
    select_gap,
    spawn_mainline,
)
from .toy_mdp import ToyMdpState, ToySpeedEnv, toy_reset, toy_step

