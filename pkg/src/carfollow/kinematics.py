"""Longitudinal point-mass kinematics for a follower/leader pair.

Scalar building blocks used by every other module: time headway, relative
velocity, jerk, the discrete constant-acceleration motion step, and the
acceleration clamp (range plus optional per-step rate limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ZeroEgoSpeed

# Ego speeds at or below this are treated as zero for headway purposes.
SPEED_EPS = 1e-9

# Sanity bound for recorded accelerations, m/s^2.
ACCEL_SANITY = 10.0


@dataclass(frozen=True)
class VehiclePoint:
    """Longitudinal state of one vehicle: position m, speed m/s, accel m/s^2."""

    pos: float
    speed: float
    accel: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.pos) and math.isfinite(self.speed) and math.isfinite(self.accel)):
            raise ValueError("vehicle state must be finite")
        if self.speed < 0.0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        if abs(self.accel) > ACCEL_SANITY:
            raise ValueError(f"|accel| exceeds sanity bound {ACCEL_SANITY}: {self.accel}")


@dataclass(frozen=True)
class ActionLimits:
    """Acceleration command limits: absolute range and per-step rate cap."""

    min_accel: float = -4.0
    max_accel: float = 4.0
    max_delta: float = 0.24
    delta_enabled: bool = True

    def __post_init__(self):
        if not self.min_accel < self.max_accel:
            raise ValueError("min_accel must be < max_accel")
        if self.max_delta <= 0.0:
            raise ValueError("max_delta must be > 0")


def headway(gap: float, ego_speed: float) -> float:
    """Time headway in seconds: bumper-to-bumper gap over ego speed.

    Undefined at (near-)zero ego speed; raises ZeroEgoSpeed rather than
    returning infinity so callers must decide how to handle stopped egos.
    """
    if ego_speed <= SPEED_EPS:
        raise ZeroEgoSpeed(f"ego speed {ego_speed} too small for a time headway")
    return gap / ego_speed


def relative_velocity(lead_speed: float, ego_speed: float) -> float:
    """Closing-rate convention: positive when the gap is opening."""
    return lead_speed - ego_speed


def jerk(accel_now: float, accel_prev: float, dt: float) -> float:
    """First difference of acceleration over one step, m/s^3."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    return (accel_now - accel_prev) / dt


def _step_scalar(pos: float, speed: float, accel: float, dt: float) -> tuple[float, float]:
    """Advance (pos, speed) by one constant-acceleration step of dt seconds.

    Speed is floored at zero: a step that would cross zero stops exactly at
    the crossing time, advancing pos by speed^2 / (2|accel|), and holds.
    """
    v_next = speed + accel * dt
    if v_next > 0.0:
        return pos + speed * dt + 0.5 * accel * dt * dt, v_next
    if accel < 0.0:
        t_stop = speed / -accel
        return pos + speed * t_stop + 0.5 * accel * t_stop * t_stop, 0.0
    # speed == 0 and accel <= 0: stay put.
    return pos, 0.0


def step_motion(point: VehiclePoint, accel: float, dt: float) -> VehiclePoint:
    """One discrete motion update with the commanded acceleration.

    Args:
        point: current state; point.accel is ignored for the update.
        accel: commanded acceleration held constant over the step, m/s^2.
        dt: step length in seconds, > 0.

    Returns:
        The state dt later, carrying the commanded accel.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    pos, speed = _step_scalar(point.pos, point.speed, accel, dt)
    return VehiclePoint(pos=pos, speed=speed, accel=accel)


def clamp_action(prev_accel: float, proposed: float, limits: ActionLimits) -> float:
    """Clamp a proposed acceleration to the admissible set.

    The admissible set is [min_accel, max_accel], intersected with
    [prev_accel - max_delta, prev_accel + max_delta] when the rate limit is
    enabled.  Returns the closest admissible value, so the clamp is
    idempotent.
    """
    lo = limits.min_accel
    hi = limits.max_accel
    if limits.delta_enabled:
        lo = max(lo, prev_accel - limits.max_delta)
        hi = min(hi, prev_accel + limits.max_delta)
    return min(hi, max(lo, proposed))
