"""
Immediate reward for the merge maneuver.

Every term is a penalty (<= 0): acceleration magnitude for smoothness, bumper
gaps to the gap-front and gap-back vehicles for safety, and a polygonal speed
band for promptness.
"""

from dataclasses import dataclass

from .common import ConfigError

SPEED_LIMIT = 29.0576  # 65 mi/h in m/s


@dataclass
class RewardWeights:
    w_accel: float = 0.5
    w_front: float = 2.0
    w_back: float = 1.0
    w_speed: float = 0.2
    d_min: float = 2.0
    d_safe: float = 15.0
    v_lo: float = 25.0
    v_hi: float = SPEED_LIMIT
    activation_distance: float = 100.0

    def validate(self) -> "RewardWeights":
        weights = [self.w_accel, self.w_front, self.w_back, self.w_speed]
        if min(weights) < 0:
            raise ConfigError(f"reward weights must be >= 0, got {weights}")
        if not self.w_front > self.w_back:
            raise ConfigError("reward.w_front must exceed reward.w_back")
        if self.w_speed > min(self.w_accel, self.w_front, self.w_back):
            raise ConfigError("reward.w_speed must be the smallest weight")
        if not self.d_min < self.d_safe:
            raise ConfigError("reward.d_min must be smaller than reward.d_safe")
        if not self.v_lo < self.v_hi:
            raise ConfigError("reward.v_lo must be smaller than reward.v_hi")
        if self.activation_distance < 0:
            raise ConfigError("reward.activation_distance must be >= 0")
        return self


@dataclass(frozen=True)
class RewardBreakdown:
    r_accel: float
    r_front: float
    r_back: float
    r_speed: float

    @property
    def total(self) -> float:
        return self.r_accel + self.r_front + self.r_back + self.r_speed

    @classmethod
    def zero(cls) -> "RewardBreakdown":
        return cls(0.0, 0.0, 0.0, 0.0)


def r_accel(a: float, weights: RewardWeights = RewardWeights()) -> float:
    return -weights.w_accel * abs(a)


def gap_penalty(d: float, weights: RewardWeights = RewardWeights()) -> float:
    """Penalty shape for one bumper gap: zero beyond d_safe, quadratic inside
    the safety band, growing linearly below d_min."""
    if d >= weights.d_safe:
        return 0.0
    if d >= weights.d_min:
        return ((weights.d_safe - d) / (weights.d_safe - weights.d_min)) ** 2
    return 1.0 + (weights.d_min - d)


def r_distance(d_front: float, d_back: float, active: bool,
               weights: RewardWeights = RewardWeights()) -> tuple[float, float]:
    if not active:
        return 0.0, 0.0
    return (-weights.w_front * gap_penalty(d_front, weights),
            -weights.w_back * gap_penalty(d_back, weights))


def speed_penalty(v: float, weights: RewardWeights = RewardWeights()) -> float:
    if v < weights.v_lo:
        return (weights.v_lo - v) / weights.v_lo
    if v > weights.v_hi:
        return (v - weights.v_hi) / weights.v_hi
    return 0.0


def r_speed(v: float, weights: RewardWeights = RewardWeights()) -> float:
    return -weights.w_speed * speed_penalty(v, weights)


def is_active(ego_x: float, merge_point_x: float, weights: RewardWeights = RewardWeights()) -> bool:
    # Also true once the ego is past the merge point.
    return ego_x >= merge_point_x - weights.activation_distance


def immediate_reward(world, a: float, weights: RewardWeights = RewardWeights()) -> RewardBreakdown:
    """
    Reward for the tick that produced `world` under commanded acceleration `a`.

    Args:
        world: WorldState after the tick; gap distances come from its
            currently selected gap vehicles (virtual neighbors when missing)
        a: commanded ego acceleration in m/s^2
        weights: reward weights

    Returns:
        RewardBreakdown whose total is the exact sum of its four terms
    """
    d_front, d_back = world.gap_distances()
    active = is_active(world.ego.x, world.geometry.merge_point_x, weights)
    front, back = r_distance(d_front, d_back, active, weights)
    return RewardBreakdown(
        r_accel=r_accel(a, weights),
        r_front=front,
        r_back=back,
        r_speed=r_speed(world.ego.v, weights),
    )
