import numpy as np
import pytest

from vcsearch.characteristics import builtin_table
from vcsearch.metrics import SafetyRecord
from vcsearch.objectives import EvaluationContext, EvaluationRecord, ObjectiveVector
from vcsearch.simulator import ScenarioConfig, SimulationTrace


@pytest.fixture(scope="session")
def carla():
    return builtin_table("carla")


@pytest.fixture(scope="session")
def lgsvl():
    return builtin_table("lgsvl")


@pytest.fixture(scope="session")
def sun_scenario():
    return ScenarioConfig.pedestrian_crossing("sun")


@pytest.fixture(scope="session")
def sun_ctx(carla, sun_scenario):
    return EvaluationContext(table=carla, scenario=sun_scenario)


def make_trace(
    t,
    ego_speed=None,
    ego_accel=None,
    obstacle_distance=None,
    relative_speed=None,
    brake=None,
    throttle=None,
    collided=False,
    collision_speed=0.0,
    min_distance=1.0,
    completed=True,
    time_step=0.1,
):
    """Hand-constructed trace for metric tests."""
    n = len(t)
    zeros = [0.0] * n

    def arr(x, default, dtype=np.float64):
        return np.asarray(default if x is None else x, dtype=dtype)

    return SimulationTrace(
        t=np.asarray(t, dtype=np.float64),
        ego_position=np.cumsum(arr(ego_speed, zeros)) * time_step,
        ego_speed=arr(ego_speed, zeros),
        ego_accel=arr(ego_accel, zeros),
        obstacle_distance=arr(obstacle_distance, [np.inf] * n),
        relative_speed=arr(relative_speed, zeros),
        brake_command=arr(brake, [False] * n, np.bool_),
        throttle_command=arr(throttle, [False] * n, np.bool_),
        collided=collided,
        collision_speed=collision_speed,
        min_distance=min_distance,
        completed=completed,
        time_step=time_step,
    )


def make_record(
    table,
    changes=None,
    safety_degree=1.0,
    tet=0.0,
    tit=0.0,
    ave_dece=0.0,
    generation=0,
):
    """Synthetic evaluation record: `changes` maps characteristic name to a
    new (filtered) value."""
    changes = changes or {}
    orig = table.originals
    filtered = list(orig)
    for name, value in changes.items():
        filtered[table.index_of(name)] = value
    changed = [i for i in range(len(orig)) if filtered[i] != orig[i]]
    f_diff = max(
        (abs(orig[i] - filtered[i]) / orig[i] for i in changed), default=0.0
    )
    return EvaluationRecord(
        raw=tuple(filtered),
        filtered=tuple(filtered),
        objectives=ObjectiveVector(
            f_safe=safety_degree, f_diff=f_diff, f_num_diff=len(changed)
        ),
        safety=SafetyRecord(
            safety_degree=safety_degree,
            tet=tet,
            tit=tit,
            ave_dece=ave_dece,
            ttc_star_used=1.5,
        ),
        trace_digest="synthetic",
        generation=generation,
    )
