import math

import numpy as np
import pytest

from vcsearch.simulator import (
    G,
    ScenarioConfig,
    SimulationTrace,
    VehicleParams,
    brake_deceleration,
    simulate,
    stopping_distance,
)


def params_with(carla, **changes):
    values = list(carla.originals)
    for name, value in changes.items():
        values[carla.index_of(name)] = value
    return VehicleParams.from_assignment(values, carla)


def test_original_params_are_safe(carla, sun_scenario):
    trace = simulate(params_with(carla), sun_scenario)
    assert not trace.collided
    assert trace.completed
    assert trace.min_distance > 0


def test_radius_unit_conversion(carla, lgsvl):
    p = VehicleParams.from_assignment(carla.originals, carla)
    assert p.radius == pytest.approx(0.355)  # table stores centimetres
    q = VehicleParams.from_assignment(lgsvl.originals, lgsvl)
    assert q.radius == pytest.approx(0.35)  # table stores metres


def test_weak_brakes_shrink_margin(carla, sun_scenario):
    base = simulate(params_with(carla), sun_scenario)
    weak = simulate(params_with(carla, maxBrakeTorque=1200.0), sun_scenario)
    assert weak.min_distance < base.min_distance


def test_brake_monotonicity(carla, sun_scenario):
    margins = [
        simulate(params_with(carla, maxBrakeTorque=tb), sun_scenario).min_distance
        for tb in (1200.0, 1350.0, 1500.0, 1650.0)
    ]
    assert margins == sorted(margins)


def test_rain_is_less_safe(carla):
    sun = simulate(params_with(carla), ScenarioConfig.pedestrian_crossing("sun"))
    rain = simulate(params_with(carla), ScenarioConfig.pedestrian_crossing("rain"))
    assert rain.min_distance < sun.min_distance


def test_every_characteristic_is_live(carla):
    """Each characteristic changes the outcome in at least one weather."""
    for i, spec in enumerate(carla.specs):
        moved = False
        for weather in ("sun", "rain"):
            scenario = ScenarioConfig.pedestrian_crossing(weather)
            base = simulate(params_with(carla), scenario).min_distance
            for value in (spec.lower, spec.upper):
                values = list(carla.originals)
                values[i] = value
                trace = simulate(
                    VehicleParams.from_assignment(values, carla), scenario
                )
                if trace.min_distance != base:
                    moved = True
        assert moved, f"{spec.name} has no effect in any weather"


def test_determinism(carla, sun_scenario):
    a = simulate(params_with(carla), sun_scenario)
    b = simulate(params_with(carla), sun_scenario)
    assert a.digest() == b.digest()


def test_collision_consistency(carla, sun_scenario):
    # Heavy, weak-braked, high-latency car: force a collision.
    trace = simulate(
        params_with(carla, mass=2700.0, maxBrakeTorque=1200.0, radius=37.0),
        ScenarioConfig.pedestrian_crossing("rain"),
    )
    if trace.collided:
        assert trace.min_distance <= 0
        assert trace.collision_speed >= 0
        assert not trace.completed
    else:
        assert trace.min_distance > 0
        assert trace.collision_speed == 0.0


def test_kinematic_consistency(carla, sun_scenario):
    trace = simulate(params_with(carla), sun_scenario)
    dt = trace.time_step
    dx = np.diff(trace.ego_position)
    expected = trace.ego_speed[:-1] * dt
    tol = 10 * dt * dt * np.abs(trace.ego_accel).max()
    assert np.all(np.abs(dx - expected) <= tol + 1e-12)


def test_sample_spacing_and_command_exclusivity(carla, sun_scenario):
    trace = simulate(params_with(carla), sun_scenario)
    assert np.allclose(np.diff(trace.t), trace.time_step)
    assert not np.any(trace.brake_command & trace.throttle_command)


def test_lead_vehicle_scenario(carla):
    trace = simulate(
        params_with(carla), ScenarioConfig.lead_vehicle_stopped("sun")
    )
    assert not trace.collided
    assert trace.completed
    assert trace.min_distance > 0


def test_stopping_distance_closed_form(carla):
    p = params_with(carla)
    a = brake_deceleration(p, p.tire_friction)
    assert a == pytest.approx(4.0 * 1500.0 / (0.355 * 2404.0))
    d = stopping_distance(p, 10.0)
    assert d == pytest.approx(10.0**2 / (2 * a), rel=0.02)


def test_scenario_invariants():
    with pytest.raises(ValueError):
        ScenarioConfig.pedestrian_crossing("sun", time_step=0.0)
    with pytest.raises(ValueError):
        ScenarioConfig.pedestrian_crossing("hail")
    with pytest.raises(ValueError):
        ScenarioConfig(kind="teleport")


def test_samples_property(carla, sun_scenario):
    trace = simulate(params_with(carla), sun_scenario)
    samples = trace.samples
    assert len(samples) == len(trace)
    assert samples[0].t == 0.0
    assert samples[10].ego_speed == trace.ego_speed[10]


def test_assignment_length_checked(carla):
    with pytest.raises(ValueError):
        VehicleParams.from_assignment((1.0, 2.0), carla)
