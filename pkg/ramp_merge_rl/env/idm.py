"""
Intelligent Driver Model (IDM) car-following law for mainline vehicles.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import A_MAX, A_MIN


@dataclass(frozen=True)
class IDMParams:
    """
    Attributes:
        a_max: maximum acceleration, m/s^2
        b: comfortable deceleration, m/s^2
        T: safe time headway, s
        s0: jam distance, m
        delta: acceleration exponent
    """
    a_max: float = 1.5
    b: float = 2.0
    T: float = 1.2
    s0: float = 2.0
    delta: float = 4.0


def idm_acceleration(v: float, v0: float, gap: Optional[float] = None, dv: float = 0.0,
                     params: IDMParams = IDMParams()) -> float:
    """
    IDM acceleration from scalar kinematics.

    Args:
        v: follower speed
        v0: follower desired speed
        gap: bumper-to-bumper gap to the leader, None on a free road
        dv: approach rate, follower speed minus leader speed
        params: IDM parameters

    Returns:
        acceleration clipped to the vehicle's physical range
    """
    free = 1.0 - (v / max(v0, 1e-6)) ** params.delta
    if gap is None:
        return float(np.clip(params.a_max * free, A_MIN, A_MAX))
    if gap <= 0.0:
        return A_MIN
    s_star = params.s0 + v * params.T + v * dv / (2.0 * np.sqrt(params.a_max * params.b))
    accel = params.a_max * (free - (s_star / gap) ** 2)
    return float(np.clip(accel, A_MIN, A_MAX))


def idm_accel(follower, leader=None, params: IDMParams = IDMParams()) -> float:
    """IDM acceleration of `follower` behind `leader` (any objects with x, v,
    length and, for the follower, desired_speed)."""
    if leader is None:
        return idm_acceleration(follower.v, follower.desired_speed, params=params)
    gap = leader.x - follower.x - leader.length
    return idm_acceleration(follower.v, follower.desired_speed, gap, follower.v - leader.v, params)
