"""Point kinematics: headway, relative velocity, jerk, exact stepping, clamps."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carfollow.errors import ZeroEgoSpeed
from carfollow.kinematics import (
    ACCEL_SANITY,
    SPEED_EPS,
    ActionLimits,
    VehiclePoint,
    clamp_action,
    headway,
    jerk,
    relative_velocity,
    step_motion,
)


# ---------------------------------------------------------------- observables
def test_headway_examples() -> None:
    assert headway(30.0, 20.0) == 1.5
    assert headway(15.0, 15.0) == 1.0


def test_headway_zero_speed_raises() -> None:
    with pytest.raises(ZeroEgoSpeed):
        headway(10.0, 0.0)
    with pytest.raises(ZeroEgoSpeed):
        headway(10.0, SPEED_EPS)  # boundary is inclusive


def test_relative_velocity_sign_convention() -> None:
    # positive when the leader is faster (gap opening)
    assert relative_velocity(22.0, 20.0) == 2.0
    assert relative_velocity(18.0, 20.0) == -2.0
    assert relative_velocity(20.0, 20.0) == 0.0


def test_jerk_examples() -> None:
    assert jerk(0.5, 0.26, 0.08) == pytest.approx(3.0, rel=1e-12)
    assert jerk(-0.5, 0.5, 0.08) == pytest.approx(-12.5, rel=1e-12)
    assert jerk(0.7, 0.7, 0.08) == 0.0


def test_jerk_requires_positive_dt() -> None:
    with pytest.raises(ValueError):
        jerk(0.1, 0.0, 0.0)
    with pytest.raises(ValueError):
        jerk(0.1, 0.0, -0.08)


# ---------------------------------------------------------------- validation
def test_vehicle_point_validation() -> None:
    with pytest.raises(ValueError):
        VehiclePoint(0.0, -0.1, 0.0)  # negative speed
    with pytest.raises(ValueError):
        VehiclePoint(0.0, 1.0, ACCEL_SANITY + 0.1)  # insane accel
    with pytest.raises(ValueError):
        VehiclePoint(float("nan"), 1.0, 0.0)
    p = VehiclePoint(1.0, 2.0, -3.0)
    assert (p.pos, p.speed, p.accel) == (1.0, 2.0, -3.0)


def test_action_limits_validation() -> None:
    with pytest.raises(ValueError):
        ActionLimits(min_accel=1.0, max_accel=-1.0)
    with pytest.raises(ValueError):
        ActionLimits(max_delta=0.0)


# ------------------------------------------------------------------ stepping
def test_step_motion_forced_example() -> None:
    nxt = step_motion(VehiclePoint(0.0, 20.0, 0.0), 1.0, 0.08)
    assert nxt.speed == pytest.approx(20.08, rel=1e-15)
    assert nxt.pos == pytest.approx(1.6032, rel=1e-12)
    assert nxt.accel == 1.0  # carries the commanded accel


def test_step_motion_zero_accel_is_exact() -> None:
    p = VehiclePoint(5.0, 20.0, 0.0)
    nxt = step_motion(p, 0.0, 0.08)
    assert nxt.speed == 20.0
    assert nxt.pos == 5.0 + 20.0 * 0.08  # bit-exact, no accel term


def test_step_motion_stops_exactly_at_zero_speed() -> None:
    # v=0.1, a=-4: stop occurs at t*=0.025 s inside the 0.08 s step.
    nxt = step_motion(VehiclePoint(0.0, 0.1, 0.0), -4.0, 0.08)
    assert nxt.speed == 0.0
    assert nxt.pos == pytest.approx(0.00125, rel=1e-12)


def test_step_motion_stationary_with_braking_stays_put() -> None:
    nxt = step_motion(VehiclePoint(7.0, 0.0, 0.0), -2.0, 0.08)
    assert nxt.pos == 7.0
    assert nxt.speed == 0.0


def test_step_motion_ignores_stale_point_accel() -> None:
    a = step_motion(VehiclePoint(0.0, 10.0, 3.0), 1.0, 0.1)
    b = step_motion(VehiclePoint(0.0, 10.0, -3.0), 1.0, 0.1)
    assert a == b


@given(
    speed=st.floats(0.0, 45.0),
    accel=st.floats(-4.0, 4.0),
    dt=st.floats(1e-3, 0.5),
    pos=st.floats(-1e3, 1e3),
)
@settings(max_examples=300, deadline=None)
def test_step_motion_speed_never_negative(speed, accel, dt, pos) -> None:
    nxt = step_motion(VehiclePoint(pos, speed, 0.0), accel, dt)
    assert nxt.speed >= 0.0


@given(
    speed=st.floats(0.0, 45.0),
    accel=st.floats(-4.0, 4.0),
    dt=st.floats(1e-3, 0.5),
    pos=st.floats(-1e3, 1e3),
)
@settings(max_examples=300, deadline=None)
def test_two_half_steps_equal_one_step(speed, accel, dt, pos) -> None:
    p = VehiclePoint(pos, speed, 0.0)
    whole = step_motion(p, accel, dt)
    half = step_motion(step_motion(p, accel, dt / 2.0), accel, dt / 2.0)
    assert half.pos == pytest.approx(whole.pos, rel=1e-12, abs=1e-12)
    assert half.speed == pytest.approx(whole.speed, rel=1e-12, abs=1e-12)


def test_step_motion_matches_closed_form_batch() -> None:
    rng = np.random.default_rng(42)
    for _ in range(2000):
        pos = rng.uniform(-1e3, 1e3)
        v = rng.uniform(0.0, 45.0)
        a = rng.uniform(-4.0, 4.0)
        dt = rng.uniform(0.01, 0.2)
        nxt = step_motion(VehiclePoint(pos, v, 0.0), a, dt)
        if v + a * dt > 0.0:
            exp_v = v + a * dt
            exp_p = pos + v * dt + 0.5 * a * dt * dt
        elif a < 0.0:
            ts = v / -a
            exp_v = 0.0
            exp_p = pos + v * ts + 0.5 * a * ts * ts
        else:
            exp_v = 0.0
            exp_p = pos
        assert nxt.speed == pytest.approx(exp_v, rel=1e-12, abs=1e-15)
        assert nxt.pos == pytest.approx(exp_p, rel=1e-12, abs=1e-12)


# -------------------------------------------------------------------- clamps
def test_clamp_action_examples() -> None:
    lim = ActionLimits()
    assert clamp_action(0.5, 1.0, lim) == pytest.approx(0.74, abs=1e-15)
    assert clamp_action(0.5, 0.6, lim) == 0.6
    off = ActionLimits(delta_enabled=False)
    assert clamp_action(3.9, 7.0, off) == 4.0
    assert clamp_action(3.9, 7.0, lim) == pytest.approx(4.0, abs=1e-15)


def test_clamp_action_lower_side() -> None:
    lim = ActionLimits()
    assert clamp_action(-0.5, -3.0, lim) == pytest.approx(-0.74, abs=1e-15)
    assert clamp_action(0.0, -9.0, ActionLimits(delta_enabled=False)) == -4.0


@given(
    prev=st.floats(-4.0, 4.0),
    proposed=st.floats(-10.0, 10.0),
    enabled=st.booleans(),
)
@settings(max_examples=300, deadline=None)
def test_clamp_action_idempotent_and_admissible(prev, proposed, enabled) -> None:
    lim = ActionLimits(delta_enabled=enabled)
    out = clamp_action(prev, proposed, lim)
    assert lim.min_accel <= out <= lim.max_accel
    if enabled:
        assert abs(out - prev) <= lim.max_delta + 1e-12
    # idempotent: an admissible value passes through unchanged
    assert clamp_action(prev, out, lim) == out
    # closest admissible point: anything admissible is no closer to proposal
    assert abs(out - proposed) <= abs(prev - proposed) + 1e-12
