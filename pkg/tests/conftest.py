"""Shared fixtures: hand-built traces with exactly known kinematics."""

from __future__ import annotations

import numpy as np
import pytest

from carfollow.trajectory import EpisodeTrace


def make_constant_trace(
    n: int = 126,
    dt: float = 0.08,
    gap: float = 30.0,
    speed: float = 20.0,
    lead_speed: float | None = None,
    source: str = "synthetic",
) -> EpisodeTrace:
    """Trace where both vehicles hold constant speed (accel 0 everywhere).

    Positions are integrated exactly (pos = p0 + k*v*dt), so replaying the
    stored accelerations through the package integrator reproduces the trace.
    """
    vl = speed if lead_speed is None else lead_speed
    k = np.arange(n, dtype=float)
    return EpisodeTrace(
        dt=dt,
        lead_pos=gap + k * vl * dt,
        lead_speed=np.full(n, vl),
        lead_accel=np.zeros(n),
        ego_pos=k * speed * dt,
        ego_speed=np.full(n, speed),
        ego_accel=np.zeros(n),
        source=source,
    )


@pytest.fixture
def constant_trace() -> EpisodeTrace:
    return make_constant_trace()
