"""Surrogate safety metrics computed from a simulation trace.

All four are pure functions of the trace: the final-distance safety degree,
time exposed / time integrated time-to-collision against a critical
threshold, and the mean deceleration of the first continuous braking cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import SimulationTrace


@dataclass(frozen=True)
class SafetyRecord:
    safety_degree: float
    tet: float
    tit: float
    ave_dece: float
    ttc_star_used: float


def safety_degree(trace: SimulationTrace) -> float:
    """Minimum obstacle distance if positive, else negative collision speed."""
    if trace.min_distance > 0:
        return trace.min_distance
    return -trace.collision_speed


def ttc_series(trace: SimulationTrace) -> list[tuple[float, float]]:
    """(t, ttc) for samples on a closing collision course; others omitted."""
    mask = np.isfinite(trace.obstacle_distance) & (trace.relative_speed > 0)
    ts = trace.t[mask]
    ttcs = trace.obstacle_distance[mask] / trace.relative_speed[mask]
    return list(zip(ts.tolist(), ttcs.tolist()))


def tet(series: list[tuple[float, float]], ttc_star: float, time_step: float) -> float:
    """Total time with 0 <= ttc <= ttc_star."""
    return sum(time_step for _, ttc in series if 0.0 <= ttc <= ttc_star)


def tit(series: list[tuple[float, float]], ttc_star: float, time_step: float) -> float:
    """Area below the ttc_star threshold over the exposed samples."""
    return sum(
        (ttc_star - ttc) * time_step for _, ttc in series if 0.0 <= ttc <= ttc_star
    )


def ave_dece(trace: SimulationTrace) -> float:
    """Mean |deceleration| over the first continuous braking cycle.

    The cycle is the first maximal run of brake-command samples with no
    throttle command; 0 if the trace contains no braking.
    """
    brake = trace.brake_command & ~trace.throttle_command
    if not brake.any():
        return 0.0
    start = int(np.argmax(brake))
    rest = ~brake[start:]
    end = start + int(np.argmax(rest)) if rest.any() else len(brake)
    cycle = trace.ego_accel[start:end]
    if cycle.size == 0:
        return 0.0
    return float(np.mean(np.abs(cycle)))


def safety_record(trace: SimulationTrace, ttc_star: float) -> SafetyRecord:
    series = ttc_series(trace)
    return SafetyRecord(
        safety_degree=safety_degree(trace),
        tet=tet(series, ttc_star, trace.time_step),
        tit=tit(series, ttc_star, trace.time_step),
        ave_dece=ave_dece(trace),
        ttc_star_used=ttc_star,
    )
