"""Deterministic longitudinal-dynamics backend.

Point-mass model integrated with forward Euler at a fixed time step.  The
embedded controller cruises to a target speed and issues a full emergency
brake when the obstacle ahead gets time-critical.  Every characteristic in
the shipped tables influences the outcome: the ones without a direct
longitudinal role perturb brake-actuation latency and gear-shift dead time.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .characteristics import Assignment, CharacteristicTable

G = 9.81  # m/s^2
RHO_A = 2.5  # air density * frontal area, folded into one constant, kg/m
POWER_PER_RPM = 8.0  # W per r/min of max engine rpm
MAX_DRIVE_ACCEL = 4.0  # comfort cap on commanded acceleration, m/s^2
BASE_BRAKE_LATENCY = 0.08  # s, scaled by the auxiliary latency factor
DECLUTCH_FRACTION = 0.05  # brake actuation includes declutching: this fraction
#   of the gear-switch time adds to the latency
ENGINE_BRAKE_FRACTION = 0.05  # overrun drag as a fraction of peak engine power
TTC_BRAKE_TRIGGER = 2.0  # s
DISTANCE_BRAKE_TRIGGER = 8.0  # m
RAIN_FRICTION_SCALE = 0.7
RAIN_PERCEPTION_DELAY = 0.15  # s
PEDESTRIAN_BODY_RADIUS = 0.5  # m
GEAR_SHIFT_SPEEDS = (6.0, 11.0, 16.0)  # m/s, upward crossings trigger a shift

# Characteristics with a direct longitudinal role; everything else feeds the
# auxiliary latency factor.
_DIRECT_NAMES = frozenset(
    {
        "mass",
        "maxBrakeTorque",
        "radius",
        "tireFric",
        "dragCoeff",
        "tireDragCoeff",
        "max_rpm",
        "maxMotorTorque",
        "gearSwitchTime",
        "shiftTime",
    }
)


class SimulationDiverged(RuntimeError):
    """Non-finite state encountered during integration."""


@dataclass(frozen=True)
class VehicleParams:
    mass: float  # kg
    brake_torque: float  # N*m
    radius: float  # m
    tire_friction: float
    drag_coeff: float
    engine_power: float  # W
    motor_torque: float | None  # N*m, None when the table has no such entry
    gear_switch_time: float  # s
    latency_factor: float  # scales brake-actuation latency and shift dead time

    @classmethod
    def from_assignment(
        cls, values: Sequence[float], table: CharacteristicTable
    ) -> "VehicleParams":
        if len(values) != len(table):
            raise ValueError("assignment length does not match table")
        by_name = {s.name: (float(v), s) for s, v in zip(table.specs, values)}

        def get(name: str, default: float | None = None) -> float | None:
            if name in by_name:
                return by_name[name][0]
            return default

        radius = get("radius")
        if radius is None:
            raise ValueError("table has no 'radius' characteristic")
        if by_name["radius"][1].unit == "cm":
            radius /= 100.0

        mass = get("mass")
        brake = get("maxBrakeTorque")
        if mass is None or brake is None:
            raise ValueError("table must define 'mass' and 'maxBrakeTorque'")

        drag = get("dragCoeff")
        if drag is None:
            drag = get("tireDragCoeff", 0.3)

        max_rpm = get("max_rpm", 5800.0)
        gear_time = get("gearSwitchTime")
        if gear_time is None:
            gear_time = get("shiftTime", 0.5)

        # Offsets of the auxiliary characteristics from their originals,
        # normalized by range width, shift the actuation latency by +-20%.
        offsets = []
        for name, (value, spec) in by_name.items():
            if name in _DIRECT_NAMES:
                continue
            offsets.append((value - spec.original) / spec.range_width)
        factor = 1.0
        if offsets:
            factor = 1.0 + 0.2 * (sum(offsets) / len(offsets))
            factor = min(max(factor, 0.8), 1.2)

        return cls(
            mass=mass,
            brake_torque=brake,
            radius=radius,
            tire_friction=get("tireFric", 3.5),
            drag_coeff=drag,
            engine_power=POWER_PER_RPM * max_rpm,
            motor_torque=get("maxMotorTorque"),
            gear_switch_time=gear_time,
            latency_factor=factor,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str  # "pedestrian-crossing" | "lead-vehicle-stopped"
    weather: str = "sun"  # "sun" | "rain"
    ego_initial_speed: float = 5.0  # m/s
    ego_target_speed: float = 8.0  # m/s
    initial_gap: float = 60.0  # m, ego front bumper to conflict point
    obstacle_speed: float = 1.4  # m/s, pedestrian lateral walking speed
    lane_width: float = 3.5  # m
    time_step: float = 0.01  # s
    horizon: float = 30.0  # s
    ttc_star: float = 1.5  # s

    def __post_init__(self):
        if self.kind not in ("pedestrian-crossing", "lead-vehicle-stopped"):
            raise ValueError(f"unknown scenario kind: {self.kind}")
        if self.weather not in ("sun", "rain"):
            raise ValueError(f"unknown weather: {self.weather}")
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")
        if self.horizon < self.time_step:
            raise ValueError("horizon must cover at least one step")
        if self.initial_gap <= 0:
            raise ValueError("initial_gap must be positive")
        if self.ttc_star <= 0:
            raise ValueError("ttc_star must be positive")

    @classmethod
    def pedestrian_crossing(cls, weather: str = "sun", **overrides) -> "ScenarioConfig":
        kw = dict(
            kind="pedestrian-crossing",
            weather=weather,
            ego_initial_speed=5.0,
            ego_target_speed=8.0,
            initial_gap=60.0,
            obstacle_speed=1.4,
            ttc_star=1.5,
        )
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def lead_vehicle_stopped(cls, weather: str = "sun", **overrides) -> "ScenarioConfig":
        kw = dict(
            kind="lead-vehicle-stopped",
            weather=weather,
            ego_initial_speed=6.0,
            ego_target_speed=12.0,
            initial_gap=80.0,
            obstacle_speed=0.0,
            ttc_star=3.0,
        )
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    ego_position: float
    ego_speed: float
    ego_accel: float
    obstacle_distance: float  # +inf while the obstacle is outside the ego lane
    relative_speed: float
    brake_command: bool
    throttle_command: bool


@dataclass
class SimulationTrace:
    t: np.ndarray
    ego_position: np.ndarray
    ego_speed: np.ndarray
    ego_accel: np.ndarray
    obstacle_distance: np.ndarray
    relative_speed: np.ndarray
    brake_command: np.ndarray
    throttle_command: np.ndarray
    collided: bool
    collision_speed: float
    min_distance: float
    completed: bool
    time_step: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[TrajectorySample]:
        return [
            TrajectorySample(
                float(self.t[i]),
                float(self.ego_position[i]),
                float(self.ego_speed[i]),
                float(self.ego_accel[i]),
                float(self.obstacle_distance[i]),
                float(self.relative_speed[i]),
                bool(self.brake_command[i]),
                bool(self.throttle_command[i]),
            )
            for i in range(len(self.t))
        ]

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (
            self.t,
            self.ego_position,
            self.ego_speed,
            self.ego_accel,
            self.obstacle_distance,
            self.relative_speed,
        ):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        for arr in (self.brake_command, self.throttle_command):
            h.update(np.ascontiguousarray(arr, dtype=np.bool_).tobytes())
        h.update(
            repr(
                (self.collided, self.collision_speed, self.min_distance, self.completed)
            ).encode()
        )
        return h.hexdigest()


def brake_deceleration(params: VehicleParams, mu: float) -> float:
    """Full-brake deceleration: wheel-torque limited, capped by tire grip."""
    return min(4.0 * params.brake_torque / (params.radius * params.mass), mu * G)


def drag_force(params: VehicleParams, speed: float) -> float:
    return 0.5 * RHO_A * params.drag_coeff * speed * speed


def drive_force_limit(params: VehicleParams, mu: float, speed: float) -> float:
    limit = min(params.engine_power / max(speed, 1.0), mu * params.mass * G)
    if params.motor_torque is not None:
        limit = min(limit, 4.0 * params.motor_torque / params.radius)
    return limit


def stopping_distance(
    params: VehicleParams, v0: float, time_step: float = 0.01, weather: str = "sun"
) -> float:
    """Distance to full stop under an immediate full brake from speed v0.

    Uses the same brake and drag model as simulate(), with no actuation
    latency, so it can be checked against the constant-deceleration
    closed form v0^2 / (2 a).
    """
    mu = params.tire_friction * (RAIN_FRICTION_SCALE if weather == "rain" else 1.0)
    a_brake = brake_deceleration(params, mu)
    x, v = 0.0, v0
    while v > 0.0:
        a = a_brake + drag_force(params, v) / params.mass
        x += v * time_step
        v -= a * time_step
    return x


class _Pedestrian:
    """Scripted crossing pedestrian: fixed trajectory, independent of the ego."""

    def __init__(self, scenario: ScenarioConfig):
        self.lateral_start = 5.0
        self.walk_speed = scenario.obstacle_speed
        self.lane_edge = scenario.lane_width / 2.0 + PEDESTRIAN_BODY_RADIUS
        # Timed so the pedestrian enters the lane when a nominal ego driving
        # at target speed from the start line is 25 m from the crossing.
        t_enter = (scenario.initial_gap - 25.0) / scenario.ego_target_speed
        walk_to_edge = (self.lateral_start - self.lane_edge) / self.walk_speed
        self.start_time = t_enter - walk_to_edge

    def lateral(self, t: float) -> float:
        if t <= self.start_time:
            return self.lateral_start
        return self.lateral_start - self.walk_speed * (t - self.start_time)

    def in_lane(self, t: float) -> bool:
        return abs(self.lateral(t)) <= self.lane_edge


def simulate(params: VehicleParams, scenario: ScenarioConfig) -> SimulationTrace:
    """Run the scenario to horizon, collision, or completion."""
    dt = scenario.time_step
    rain = scenario.weather == "rain"
    mu = params.tire_friction * (RAIN_FRICTION_SCALE if rain else 1.0)
    a_brake_full = brake_deceleration(params, mu)
    brake_latency = (
        BASE_BRAKE_LATENCY + DECLUTCH_FRACTION * params.gear_switch_time
    ) * params.latency_factor
    perception_delay = RAIN_PERCEPTION_DELAY if rain else 0.0
    shift_dead_time = params.gear_switch_time * params.latency_factor
    mass = params.mass

    pedestrian = scenario.kind == "pedestrian-crossing"
    ped = _Pedestrian(scenario) if pedestrian else None
    conflict_x = scenario.initial_gap
    body_margin = PEDESTRIAN_BODY_RADIUS if pedestrian else 0.0

    n_steps = int(round(scenario.horizon / dt))
    ts: list[float] = []
    xs: list[float] = []
    vs: list[float] = []
    accs: list[float] = []
    gaps: list[float] = []
    rels: list[float] = []
    brakes: list[bool] = []
    throttles: list[bool] = []

    x = 0.0
    v = scenario.ego_initial_speed
    trigger_time: float | None = None  # when the brake condition first held
    prev_in_lane = False
    prev_gap = math.inf
    prev_rel = 0.0
    t_prev = 0.0
    shift_until = -1.0  # drive force suppressed until this time
    collided = False
    collision_speed = 0.0
    completed = False
    inf = math.inf

    for k in range(n_steps + 1):
        t = k * dt
        if pedestrian:
            in_lane = ped.in_lane(t) and x <= conflict_x + body_margin
        else:
            in_lane = x <= conflict_x
        gap = (conflict_x - x - body_margin) if in_lane else inf
        rel = v if in_lane else 0.0

        # Collision check on the recorded state.
        if in_lane and gap <= 0.0:
            collided = True
            collision_speed = max(v, 0.0)
            ts.append(t)
            xs.append(x)
            vs.append(v)
            accs.append(0.0)
            gaps.append(gap)
            rels.append(rel)
            brakes.append(True)
            throttles.append(False)
            break

        # Emergency-brake trigger with optional rain perception delay.  The
        # condition crosses between two samples; the trigger instant is
        # interpolated inside the step so the stopping margin responds
        # smoothly to parameter changes instead of jumping by whole steps.
        condition = in_lane and gap > 0.0 and (
            (rel > 0.0 and gap / rel < TTC_BRAKE_TRIGGER) or gap < DISTANCE_BRAKE_TRIGGER
        )
        if condition and trigger_time is None:
            trigger_time = t
            if prev_in_lane and prev_rel > 0.0:
                candidates = [
                    t_prev + (prev_gap - TTC_BRAKE_TRIGGER * prev_rel) / prev_rel,
                    t_prev + (prev_gap - DISTANCE_BRAKE_TRIGGER) / prev_rel,
                ]
                valid = [c for c in candidates if c >= t_prev]
                if valid:
                    trigger_time = min(max(min(valid), t_prev), t)
        if not in_lane:
            trigger_time = None
        prev_in_lane, prev_gap, prev_rel, t_prev = in_lane, gap, rel, t

        brake_cmd = trigger_time is not None and t >= trigger_time + perception_delay
        # Fraction of this integration step with the brake actuated; the
        # actuation instant falls inside a step, so the first braking step is
        # partial and sub-step latency changes act continuously.
        brake_fraction = 0.0
        if trigger_time is not None:
            t_act = trigger_time + perception_delay + brake_latency
            brake_fraction = min(max((t + dt - t_act) / dt, 0.0), 1.0)
        brake_active = brake_fraction >= 1.0

        throttle_cmd = False
        if brake_cmd and brake_fraction > 0.0:
            accel = -min(
                brake_fraction * a_brake_full + drag_force(params, v) / mass,
                v / dt if dt > 0 else 0.0,
            )
            if v <= 0.0:
                accel = 0.0
        elif brake_cmd:
            # Command issued, actuation still in flight: coast under
            # aerodynamic drag plus engine overrun braking.
            engine_brake = ENGINE_BRAKE_FRACTION * params.engine_power / max(v, 1.0)
            accel = -(drag_force(params, v) + engine_brake) / mass
            if v <= 0.0:
                accel = 0.0
        else:
            desired = min(
                MAX_DRIVE_ACCEL, 2.0 * (scenario.ego_target_speed - v) / 1.0
            )
            if desired > 0.0:
                # Gear-shift dead time: no drive force right after an upward
                # speed-threshold crossing.
                if t < shift_until:
                    force = 0.0
                else:
                    force = min(
                        desired * mass + drag_force(params, v),
                        drive_force_limit(params, mu, v),
                    )
                    throttle_cmd = force > 0.0
                accel = (force - drag_force(params, v)) / mass
            else:
                accel = -drag_force(params, v) / mass
                if v <= 0.0:
                    accel = 0.0

        ts.append(t)
        xs.append(x)
        vs.append(v)
        accs.append(accel)
        gaps.append(gap)
        rels.append(rel)
        brakes.append(bool(brake_cmd))
        throttles.append(bool(throttle_cmd))

        # Integrate.
        new_x = x + v * dt
        new_v = max(v + accel * dt, 0.0)
        if not (math.isfinite(new_x) and math.isfinite(new_v)):
            raise SimulationDiverged(f"non-finite state at step {k} (t={t:.3f}s)")

        # Gear shifts on upward speed-threshold crossings.
        for threshold in GEAR_SHIFT_SPEEDS:
            if v < threshold <= new_v:
                shift_until = t + shift_dead_time
                break

        x, v = new_x, new_v

        # Termination: passed the conflict, or safely stopped behind a
        # permanently stationary obstacle.
        if pedestrian and x > conflict_x + 10.0:
            completed = True
            break
        if not pedestrian and v == 0.0 and brake_active:
            completed = True
            break

    gap_arr = np.asarray(gaps, dtype=np.float64)
    finite = gap_arr[np.isfinite(gap_arr)]
    min_distance = float(finite.min()) if finite.size else math.inf

    return SimulationTrace(
        t=np.asarray(ts, dtype=np.float64),
        ego_position=np.asarray(xs, dtype=np.float64),
        ego_speed=np.asarray(vs, dtype=np.float64),
        ego_accel=np.asarray(accs, dtype=np.float64),
        obstacle_distance=gap_arr,
        relative_speed=np.asarray(rels, dtype=np.float64),
        brake_command=np.asarray(brakes, dtype=np.bool_),
        throttle_command=np.asarray(throttles, dtype=np.bool_),
        collided=collided,
        collision_speed=collision_speed if collided else 0.0,
        min_distance=min_distance,
        completed=completed and not collided,
        time_step=dt,
    )
