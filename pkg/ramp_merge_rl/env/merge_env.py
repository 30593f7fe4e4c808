"""
Microscopic simulation of a single-lane on-ramp merging into the rightmost
highway lane.

All vehicles share one curvilinear longitudinal axis: the ramp path runs from
ramp_start_x to merge_point_x, where it joins the highway lane. The ego
vehicle is driven by the agent; mainline vehicles emerge at the upstream
boundary and follow IDM, and may turn cooperative or adversarial when they
are in conflict with the merging ego.
"""

import copy
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .base import A_MAX, A_MIN, BaseEnv, EpisodeStatus, StepResult
from .idm import IDMParams, idm_accel, idm_acceleration
from ..utils.common import ConfigError, make_rng
from ..utils.reward import SPEED_LIMIT, RewardWeights, immediate_reward

logger = logging.getLogger(__name__)

EGO_ID = 0


class VehicleKind(Enum):
    EGO = "ego"
    MAINLINE = "mainline"


class Behavior(Enum):
    NEUTRAL = "neutral"
    COOPERATIVE = "cooperative"
    ADVERSARIAL = "adversarial"


@dataclass
class RoadGeometry:
    ramp_start_x: float = -150.0
    merge_point_x: float = 0.0
    success_x: float = 50.0
    accel_lane_end_x: float = 100.0
    sensing_range: float = 150.0
    speed_limit: float = SPEED_LIMIT
    lane_width_ramp: float = 3.5
    lane_width_highway: float = 3.75

    def validate(self) -> "RoadGeometry":
        if not (self.ramp_start_x < self.merge_point_x < self.success_x <= self.accel_lane_end_x):
            raise ConfigError(
                "env.geometry requires ramp_start_x < merge_point_x < success_x <= accel_lane_end_x, got "
                f"{self.ramp_start_x}, {self.merge_point_x}, {self.success_x}, {self.accel_lane_end_x}")
        if self.sensing_range <= 0:
            raise ConfigError("env.geometry.sensing_range must be > 0")
        if self.speed_limit <= 0:
            raise ConfigError("env.geometry.speed_limit must be > 0")
        return self


@dataclass
class TrafficConfig:
    arrival_rate: float = 1.0 / 3.0
    spawn_x: float = -400.0
    spawn_speed_min: float = 25.0
    spawn_speed_max: float = SPEED_LIMIT
    min_spawn_headway_s: float = 1.5
    warmup_s: float = 30.0
    ego_speed_min: float = 12.0
    ego_speed_max: float = 18.0
    p_coop: float = 0.7
    adversarial_speedup: float = 0.10
    behavior_activation_distance: float = 100.0
    eta_conflict_s: float = 1.5
    gap_lock_distance: float = 50.0
    collision_zone_margin: float = 5.0
    max_episode_s: float = 60.0
    collision_penalty: float = -10.0
    timeout_penalty: float = -5.0
    dt: float = 0.1
    vehicle_length: float = 5.0
    removal_margin: float = 250.0
    idm_a_max: float = 1.5
    idm_b: float = 2.0
    idm_T: float = 1.2
    idm_s0: float = 2.0
    idm_delta: float = 4.0

    @property
    def idm(self) -> IDMParams:
        return IDMParams(a_max=self.idm_a_max, b=self.idm_b, T=self.idm_T,
                         s0=self.idm_s0, delta=self.idm_delta)

    def validate(self, geometry: RoadGeometry) -> "TrafficConfig":
        top = geometry.speed_limit * 1.1
        if self.arrival_rate < 0:
            raise ConfigError(f"env.traffic.arrival_rate must be >= 0, got {self.arrival_rate}")
        if self.arrival_rate * self.dt > 1.0:
            raise ConfigError("env.traffic.arrival_rate * dt must not exceed 1")
        for lo_name, hi_name in (("spawn_speed_min", "spawn_speed_max"), ("ego_speed_min", "ego_speed_max")):
            lo, hi = getattr(self, lo_name), getattr(self, hi_name)
            if not (0.0 <= lo <= hi <= top):
                raise ConfigError(f"env.traffic.{lo_name}/{hi_name} must satisfy 0 <= min <= max <= {top:.4f}")
        if not 0.0 <= self.p_coop <= 1.0:
            raise ConfigError("env.traffic.p_coop must be a probability")
        if self.dt <= 0 or self.max_episode_s <= 0 or self.vehicle_length <= 0:
            raise ConfigError("env.traffic.dt, max_episode_s and vehicle_length must be > 0")
        if self.collision_penalty > 0 or self.timeout_penalty > 0:
            raise ConfigError("terminal penalties must be <= 0")
        if self.spawn_x >= geometry.merge_point_x:
            raise ConfigError("env.traffic.spawn_x must lie upstream of the merge point")
        return self


@dataclass
class Vehicle:
    id: int
    kind: VehicleKind
    x: float
    v: float
    a: float = 0.0
    length: float = 5.0
    behavior: Behavior = Behavior.NEUTRAL
    desired_speed: float = SPEED_LIMIT
    behavior_drawn: bool = False


@dataclass(frozen=True)
class Observation:
    v_ev: float
    p_ev: float
    v_gfv: float
    p_gfv: float
    v_gbv: float
    p_gbv: float

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.v_ev, self.p_ev, self.v_gfv, self.p_gfv, self.v_gbv, self.p_gbv)


@dataclass
class WorldState:
    geometry: RoadGeometry
    traffic: TrafficConfig
    ego: Vehicle
    mainline: List[Vehicle] = field(default_factory=list)
    t: float = 0.0
    step_index: int = 0
    locked_gap: Optional[Tuple[Optional[int], Optional[int]]] = None
    status: EpisodeStatus = EpisodeStatus.RUNNING
    pending_spawns: int = 0
    spawned_count: int = 0
    next_vehicle_id: int = EGO_ID + 1

    def vehicle(self, vehicle_id: Optional[int]) -> Optional[Vehicle]:
        if vehicle_id is None:
            return None
        for veh in self.mainline:
            if veh.id == vehicle_id:
                return veh
        return None

    def sensed(self, veh: Optional[Vehicle]) -> Optional[Vehicle]:
        if veh is None or abs(veh.x - self.ego.x) > self.geometry.sensing_range:
            return None
        return veh

    def lane_neighbors(self) -> Tuple[Optional[Vehicle], Optional[Vehicle]]:
        """Nearest sensed mainline vehicles physically ahead of and behind the ego."""
        ego_x = self.ego.x
        front = min((veh for veh in self.mainline if veh.x >= ego_x), key=lambda veh: veh.x, default=None)
        back = max((veh for veh in self.mainline if veh.x < ego_x), key=lambda veh: veh.x, default=None)
        return self.sensed(front), self.sensed(back)

    def gap_vehicles(self) -> Tuple[Optional[Vehicle], Optional[Vehicle]]:
        # once merged the ego shares the lane, so its neighbors are physical
        if self.ego.x >= self.geometry.merge_point_x:
            return self.lane_neighbors()
        front_id, back_id = select_gap(self)
        return self.sensed(self.vehicle(front_id)), self.sensed(self.vehicle(back_id))

    def gap_distances(self) -> Tuple[float, float]:
        """Bumper gaps (nearest bumpers) to the gap-front and gap-back vehicles."""
        obs = observe(self)
        length = self.traffic.vehicle_length
        return abs(obs.p_gfv - obs.p_ev) - length, abs(obs.p_ev - obs.p_gbv) - length


def eta(vehicle: Vehicle, merge_point_x: float) -> float:
    """Estimated arrival time at the merge point; negative once past it."""
    return (merge_point_x - vehicle.x) / max(vehicle.v, 1.0)


def spawn_mainline(world: WorldState, rng: np.random.Generator) -> WorldState:
    """
    Run one tick of the upstream arrival process.

    An arrival occurs with probability arrival_rate * dt. Arrivals blocked by
    the minimum time headway stay pending and enter as soon as the boundary
    clears.
    """
    traffic = world.traffic
    if traffic.arrival_rate <= 0 and world.pending_spawns == 0:
        return world
    if traffic.arrival_rate > 0 and rng.random() < traffic.arrival_rate * traffic.dt:
        world.pending_spawns += 1
    if world.pending_spawns == 0:
        return world

    if world.mainline:
        nearest = min(world.mainline, key=lambda veh: abs(veh.x - traffic.spawn_x))
        distance = abs(nearest.x - traffic.spawn_x)
        if distance / max(nearest.v, 1.0) < traffic.min_spawn_headway_s or distance <= traffic.vehicle_length:
            return world

    v = float(rng.uniform(traffic.spawn_speed_min, traffic.spawn_speed_max))
    vehicle = Vehicle(id=world.next_vehicle_id, kind=VehicleKind.MAINLINE, x=traffic.spawn_x, v=v,
                      length=traffic.vehicle_length, desired_speed=v)
    world.next_vehicle_id += 1
    world.pending_spawns -= 1
    world.spawned_count += 1
    world.mainline.append(vehicle)
    world.mainline.sort(key=lambda veh: veh.x)
    return world


def assign_behavior(vehicle: Vehicle, ego: Vehicle, world: WorldState,
                    rng: np.random.Generator) -> Behavior:
    """Draw the cooperative/adversarial behavior of a mainline vehicle in
    conflict with the merging ego. Drawn at most once per vehicle."""
    if vehicle.kind != VehicleKind.MAINLINE or vehicle.behavior_drawn:
        return vehicle.behavior
    traffic = world.traffic
    merge_x = world.geometry.merge_point_x
    if not (merge_x - traffic.behavior_activation_distance <= ego.x <= merge_x):
        return vehicle.behavior
    if vehicle.x >= merge_x:
        return vehicle.behavior
    if abs(eta(vehicle, merge_x) - eta(ego, merge_x)) > traffic.eta_conflict_s:
        return vehicle.behavior

    vehicle.behavior_drawn = True
    if rng.random() < traffic.p_coop:
        vehicle.behavior = Behavior.COOPERATIVE
    else:
        vehicle.behavior = Behavior.ADVERSARIAL
        vehicle.desired_speed = min(vehicle.desired_speed * (1.0 + traffic.adversarial_speedup),
                                    world.geometry.speed_limit * 1.1)
    logger.debug(f"vehicle {vehicle.id} turned {vehicle.behavior.value} at t={world.t:.1f}")
    return vehicle.behavior


def _bracket_gap(world: WorldState) -> Tuple[Optional[int], Optional[int]]:
    merge_x = world.geometry.merge_point_x
    ego_eta = eta(world.ego, merge_x)
    front, back = None, None
    front_eta, back_eta = -np.inf, np.inf
    for veh in world.mainline:
        if world.sensed(veh) is None:
            continue
        veh_eta = eta(veh, merge_x)
        if veh_eta <= ego_eta:
            if veh_eta > front_eta:
                front, front_eta = veh.id, veh_eta
        elif veh_eta < back_eta:
            back, back_eta = veh.id, veh_eta
    return front, back


def select_gap(world: WorldState) -> Tuple[Optional[int], Optional[int]]:
    """
    Pick the merge gap by arrival-time bracketing.

    The gap-front vehicle is the sensed vehicle arriving last among those
    arriving no later than the ego; the gap-back vehicle is the first one
    arriving after it. Within gap_lock_distance of the merge point the pair is
    locked and reused for the rest of the episode.

    Returns:
        (front_id, back_id), either side None when missing
    """
    if world.locked_gap is not None:
        return world.locked_gap
    pair = _bracket_gap(world)
    if world.ego.x >= world.geometry.merge_point_x - world.traffic.gap_lock_distance:
        world.locked_gap = pair
        logger.debug(f"gap locked to {pair} at t={world.t:.1f}")
    return pair


def observe(world: WorldState) -> Observation:
    ego = world.ego
    geometry = world.geometry
    front, back = world.gap_vehicles()
    if front is None:
        v_gfv, p_gfv = geometry.speed_limit, ego.x + geometry.sensing_range
    else:
        v_gfv, p_gfv = front.v, front.x
    if back is None:
        v_gbv, p_gbv = geometry.speed_limit, ego.x - geometry.sensing_range
    else:
        v_gbv, p_gbv = back.v, back.x
    return Observation(v_ev=ego.v, p_ev=ego.x, v_gfv=v_gfv, p_gfv=p_gfv, v_gbv=v_gbv, p_gbv=p_gbv)


def advance(vehicle: Vehicle, a: float, dt: float) -> None:
    """Point-mass kinematics; braking through zero stops exactly at v = 0."""
    if vehicle.v + a * dt < 0.0:
        a = -vehicle.v / dt
    vehicle.x = vehicle.x + vehicle.v * dt + 0.5 * a * dt * dt
    vehicle.v = max(0.0, vehicle.v + a * dt)


class MergeEnv(BaseEnv):
    """
    Seedable on-ramp merge simulator.

    Args:
        geometry: road layout
        traffic: traffic process, behavior and episode parameters
        reward_weights: weights of the immediate reward
    """

    def __init__(self, geometry: Optional[RoadGeometry] = None, traffic: Optional[TrafficConfig] = None,
                 reward_weights: Optional[RewardWeights] = None):
        self.geometry = (geometry or RoadGeometry()).validate()
        self.traffic = (traffic or TrafficConfig()).validate(self.geometry)
        self.reward_weights = (reward_weights or RewardWeights()).validate()
        self.dt = self.traffic.dt
        self.rng: Optional[np.random.Generator] = None
        self.world: Optional[WorldState] = None

    @property
    def status(self) -> EpisodeStatus:
        if self.world is None:
            return EpisodeStatus.TIMEOUT
        return self.world.status

    def reset(self, seed: int, traffic: Optional[TrafficConfig] = None) -> WorldState:
        if traffic is not None:
            self.traffic = traffic.validate(self.geometry)
            self.dt = self.traffic.dt
        self.rng = make_rng(seed)
        placeholder = Vehicle(id=EGO_ID, kind=VehicleKind.EGO, x=self.geometry.ramp_start_x, v=0.0,
                              length=self.traffic.vehicle_length, desired_speed=self.geometry.speed_limit)
        world = WorldState(geometry=self.geometry, traffic=self.traffic, ego=placeholder)

        warmup_ticks = int(round(self.traffic.warmup_s / self.traffic.dt))
        for _ in range(warmup_ticks):
            spawn_mainline(world, self.rng)
            accels = [self._mainline_accel(world, i, ego_present=False) for i in range(len(world.mainline))]
            for veh, a in zip(world.mainline, accels):
                veh.a = a
                advance(veh, a, self.traffic.dt)
            self._repair_ordering(world)
            self._remove_departed(world)

        world.ego.v = float(self.rng.uniform(self.traffic.ego_speed_min, self.traffic.ego_speed_max))
        self.world = world
        logger.debug(f"reset seed={seed}: {len(world.mainline)} mainline vehicles after warm-up")
        return world

    def observe(self) -> Observation:
        return observe(self.world)

    def gap_distances(self) -> Tuple[float, float]:
        return self.world.gap_distances()

    def snapshot(self) -> WorldState:
        return copy.deepcopy(self.world)

    def step(self, action: float) -> StepResult:
        self._check_action(action)
        world = self.world
        traffic = self.traffic
        dt = traffic.dt

        spawn_mainline(world, self.rng)
        for veh in world.mainline:
            if not veh.behavior_drawn:
                assign_behavior(veh, world.ego, world, self.rng)

        accels = [self._mainline_accel(world, i, ego_present=True) for i in range(len(world.mainline))]
        for veh, a in zip(world.mainline, accels):
            veh.a = a
            advance(veh, a, dt)
        advance(world.ego, action, dt)
        world.ego.a = action
        self._repair_ordering(world)
        self._remove_departed(world)
        world.step_index += 1
        world.t = world.step_index * dt

        reward = immediate_reward(world, action, self.reward_weights)
        status = self._termination(world)
        penalty = 0.0
        if status == EpisodeStatus.COLLISION:
            penalty = traffic.collision_penalty
        elif status == EpisodeStatus.TIMEOUT:
            penalty = traffic.timeout_penalty
        world.status = status
        return StepResult(observation=observe(world), reward=reward, terminal=status != EpisodeStatus.RUNNING,
                          status=status, terminal_penalty=penalty)

    def trace_rows(self) -> List[dict]:
        world = self.world
        rows = []
        for veh in [world.ego] + world.mainline:
            rows.append({
                "step": world.step_index,
                "t": world.t,
                "vehicle_id": veh.id,
                "kind": veh.kind.value,
                "x": veh.x,
                "v": veh.v,
                "a": veh.a,
                "behavior": veh.behavior.value,
                "status": world.status.value,
            })
        return rows

    def _mainline_accel(self, world: WorldState, index: int, ego_present: bool) -> float:
        veh = world.mainline[index]
        leader = world.mainline[index + 1] if index + 1 < len(world.mainline) else None
        params = self.traffic.idm
        merge_x = self.geometry.merge_point_x
        if not ego_present:
            return idm_accel(veh, leader, params)

        ego = world.ego
        merged = ego.x >= merge_x
        if merged and ego.x > veh.x and (leader is None or ego.x < leader.x):
            leader = ego
        accel = idm_accel(veh, leader, params)
        if (not merged and veh.behavior == Behavior.COOPERATIVE and veh.x < merge_x
                and ego.x > veh.x and eta(ego, merge_x) < eta(veh, merge_x)):
            gap = ego.x - veh.x - ego.length
            virtual = idm_acceleration(veh.v, veh.desired_speed, gap, veh.v - ego.v, params)
            accel = min(accel, virtual)
        return float(np.clip(accel, A_MIN, A_MAX))

    def _repair_ordering(self, world: WorldState) -> None:
        mainline = world.mainline
        mainline.sort(key=lambda veh: veh.x)
        for i in range(len(mainline) - 2, -1, -1):
            veh, leader = mainline[i], mainline[i + 1]
            limit = leader.x - leader.length - 0.1
            if veh.x > limit:
                logger.warning(f"mainline overlap repaired: vehicle {veh.id} behind {leader.id} at t={world.t:.1f}")
                veh.x = limit
                veh.v = min(veh.v, leader.v)

    def _remove_departed(self, world: WorldState) -> None:
        limit = self.geometry.accel_lane_end_x + self.traffic.removal_margin
        world.mainline = [veh for veh in world.mainline if veh.x <= limit]

    def _termination(self, world: WorldState) -> EpisodeStatus:
        ego = world.ego
        geometry = self.geometry
        if ego.x > geometry.merge_point_x - self.traffic.collision_zone_margin:
            for veh in world.mainline:
                if abs(veh.x - ego.x) - veh.length <= 0.0:
                    return EpisodeStatus.COLLISION
        if ego.x >= geometry.success_x:
            return EpisodeStatus.SUCCESS
        if world.t >= self.traffic.max_episode_s - 1e-9:
            return EpisodeStatus.TIMEOUT
        return EpisodeStatus.RUNNING
