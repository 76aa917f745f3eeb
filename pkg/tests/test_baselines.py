"""Car-following baseline: IDM response, MAE calibration, trace rollouts."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carfollow.baselines import (
    ACCEL_RANGE,
    MIN_CALIBRATION_SAMPLES,
    CalibrationBounds,
    IdmParams,
    calibrate_idm_mae,
    equilibrium_gap,
    idm_accel,
    idm_predictor,
    rollout_predictor,
    style_defaults,
    wrong_style,
)
from carfollow.errors import NonPositiveGap, TooFewSamples
from carfollow.kinematics import VehiclePoint
from carfollow.styles import Style
from carfollow.trajectory import generate_synthetic_episode
from conftest import make_constant_trace

P = IdmParams()  # v0=33, time_gap=1.5, s0=2, a_max=1.5, b_comf=1.67, delta=4


# ------------------------------------------------------------------ the model
def test_idm_free_road_accelerates_at_max() -> None:
    assert idm_accel(P, 0.0, 0.0, 1e9) == pytest.approx(P.a_max, rel=1e-6)


def test_idm_standstill_at_jam_distance_is_zero() -> None:
    # v=0 at gap=s0: (s*/gap)^2 == 1, speed terms vanish -> exactly zero
    assert idm_accel(P, 0.0, 0.0, P.s0) == 0.0


def test_idm_at_desired_speed_is_zero() -> None:
    assert idm_accel(P, P.v0, 0.0, 1e9) == pytest.approx(0.0, abs=1e-6)


def test_idm_strong_closing_clamps_to_min() -> None:
    assert idm_accel(P, 30.0, 20.0, 5.0) == ACCEL_RANGE[0]


def test_idm_guarded_desired_gap_never_below_jam_distance() -> None:
    # opening fast: the dynamic term would drive s* negative without the guard
    a = idm_accel(P, 20.0, -50.0, 10.0)
    expected = P.a_max * (1.0 - (20.0 / P.v0) ** 4 - (P.s0 / 10.0) ** 2)
    assert a == pytest.approx(expected, rel=1e-12)


def test_idm_input_validation() -> None:
    with pytest.raises(NonPositiveGap):
        idm_accel(P, 10.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        idm_accel(P, -1.0, 0.0, 10.0)


def test_idm_params_validation_and_round_trip() -> None:
    with pytest.raises(ValueError):
        IdmParams(v0=0.5)
    with pytest.raises(ValueError):
        IdmParams(time_gap=0.05)
    with pytest.raises(ValueError):
        IdmParams(a_max=0.0)
    assert IdmParams.from_dict(P.to_dict()) == P


def test_style_defaults_differ_only_in_time_gap() -> None:
    a, n, c = (style_defaults(s) for s in Style)
    assert (a.time_gap, n.time_gap, c.time_gap) == (0.9, 1.5, 2.0)
    for field in ("v0", "s0", "a_max", "b_comf", "delta"):
        assert getattr(a, field) == getattr(n, field) == getattr(c, field)


@given(
    speed=st.floats(0.5, 32.0),
    gap=st.floats(2.0, 200.0),
    dv1=st.floats(-10.0, 10.0),
    bump=st.floats(0.1, 5.0),
)
@settings(max_examples=300, deadline=None)
def test_idm_monotone_in_closing_speed_and_gap(speed, gap, dv1, bump) -> None:
    # closing faster (larger delta_v) never increases commanded accel
    assert idm_accel(P, speed, dv1 + bump, gap) <= idm_accel(P, speed, dv1, gap) + 1e-12
    # a larger gap never decreases commanded accel
    assert idm_accel(P, speed, dv1, gap + bump) >= idm_accel(P, speed, dv1, gap) - 1e-12


@given(speed=st.floats(0.0, 40.0), dv=st.floats(-20.0, 20.0), gap=st.floats(0.5, 500.0))
@settings(max_examples=300, deadline=None)
def test_idm_output_always_in_range(speed, dv, gap) -> None:
    a = idm_accel(P, speed, dv, gap)
    assert ACCEL_RANGE[0] <= a <= ACCEL_RANGE[1]


# ---------------------------------------------------------------- equilibrium
def test_equilibrium_gap_zeroes_idm() -> None:
    for style in Style:
        params = style_defaults(style)
        for v in (5.0, 15.0, 25.0):
            gap = equilibrium_gap(params, v)
            assert idm_accel(params, v, 0.0, gap) == pytest.approx(0.0, abs=1e-9)


def test_equilibrium_gap_rejects_speed_at_or_above_v0() -> None:
    with pytest.raises(ValueError):
        equilibrium_gap(P, P.v0)


# ---------------------------------------------------------------- calibration
def _idm_dataset(params: IdmParams, n: int, seed: int, noise: float = 0.0):
    rng = np.random.default_rng(seed)
    v = rng.uniform(5.0, 28.0, n)
    dv = rng.uniform(-4.0, 4.0, n)
    gap = rng.uniform(0.6, 2.8, n) * v
    states = np.column_stack([v, dv, gap])
    targets = np.array([idm_accel(params, *row) for row in states])
    if noise:
        targets = targets + rng.normal(0.0, noise, n)
    return states, targets


def test_calibration_is_deterministic() -> None:
    truth = IdmParams(v0=30.0, time_gap=1.2, s0=2.2, a_max=1.2, b_comf=2.0)
    states, targets = _idm_dataset(truth, 300, seed=1, noise=0.05)
    kw = dict(grid_points=2, simplex_iters=60)
    r1 = calibrate_idm_mae(states, targets, P, CalibrationBounds(), **kw)
    r2 = calibrate_idm_mae(states, targets, P, CalibrationBounds(), **kw)
    assert r1.params == r2.params
    assert r1.mae == r2.mae
    assert r1.n_evals == r2.n_evals


def test_calibration_never_worse_than_init() -> None:
    truth = IdmParams(v0=30.0, time_gap=1.2, s0=2.2, a_max=1.2, b_comf=2.0)
    states, targets = _idm_dataset(truth, 300, seed=2, noise=0.1)
    init = style_defaults(Style.CONSERVATIVE)
    res = calibrate_idm_mae(states, targets, init, CalibrationBounds(),
                            grid_points=2, simplex_iters=60)
    init_mae = float(np.mean(np.abs(
        np.array([idm_accel(init, *row) for row in states]) - targets)))
    assert res.mae <= init_mae + 1e-12


def test_calibration_recovers_noise_free_data_reasonably() -> None:
    truth = IdmParams(v0=30.0, time_gap=1.2, s0=2.0, a_max=1.2, b_comf=2.0)
    states, targets = _idm_dataset(truth, 400, seed=3, noise=0.0)
    res = calibrate_idm_mae(states, targets, style_defaults(Style.NORMAL),
                            CalibrationBounds(), grid_points=3, simplex_iters=400)
    assert res.mae <= 0.05  # the full-budget bound lives in the acceptance suite


def test_calibration_requires_enough_samples() -> None:
    states, targets = _idm_dataset(P, MIN_CALIBRATION_SAMPLES - 1, seed=4)
    with pytest.raises(TooFewSamples) as exc:
        calibrate_idm_mae(states, targets, P, CalibrationBounds())
    assert exc.value.minimum == MIN_CALIBRATION_SAMPLES


def test_calibration_rejects_non_positive_gaps() -> None:
    states, targets = _idm_dataset(P, 150, seed=5)
    states[7, 2] = 0.0
    with pytest.raises(NonPositiveGap):
        calibrate_idm_mae(states, targets, P, CalibrationBounds())


def test_calibration_bounds_validation() -> None:
    with pytest.raises(ValueError):
        CalibrationBounds(v0=(40.0, 20.0))
    with pytest.raises(ValueError):
        CalibrationBounds(s0=(0.0, 4.0))


# ------------------------------------------------------------------- rollouts
def test_rollout_mirroring_lead_keeps_gap_constant() -> None:
    ep = generate_synthetic_episode(Style.NORMAL, seed=6, duration=20.0)
    start = 2
    gap0 = float(ep.lead_pos[start] - ep.ego_pos[start])

    def mirror_lead(features):
        return float(features.lead_accel_hist[-1])

    res = rollout_predictor(ep, mirror_lead, start_index=start,
                            ego_init=VehiclePoint(float(ep.lead_pos[start]) - gap0,
                                                  float(ep.lead_speed[start]), 0.0))
    assert not res.collision
    np.testing.assert_allclose(res.gap, gap0, rtol=0, atol=1e-9)


def test_rollout_zero_predictor_gap_grows_linearly() -> None:
    ep = make_constant_trace(n=200, speed=18.0, lead_speed=20.0, gap=25.0)

    def zero(features):
        return 0.0

    res = rollout_predictor(ep, zero, start_index=2)
    # ego holds 18 m/s while the lead moves at 20: gap opens 2 m/s * dt per step
    expect = 25.0 + 2.0 * ep.dt * res.t_index.astype(float)
    np.testing.assert_allclose(res.gap, expect, rtol=0, atol=1e-9)
    np.testing.assert_allclose(res.ego_speed, 18.0, rtol=0, atol=0)


def test_rollout_idm_predictor_is_collision_free() -> None:
    for style in Style:
        ep = generate_synthetic_episode(style, seed=8, duration=30.0)
        res = rollout_predictor(ep, idm_predictor(style_defaults(style)))
        assert not res.collision
        assert res.min_headway > 0.0
        assert res.t_index.size == ep.n_steps - 2  # rows at i = 2 .. n-1


def test_rollout_arrays_consistent() -> None:
    ep = make_constant_trace()
    res = rollout_predictor(ep, idm_predictor(P), start_index=2)
    n_rows = res.t_index.size
    for name in ("lead_pos", "lead_speed", "lead_accel", "ego_pos",
                 "ego_speed", "ego_accel", "gap", "headway"):
        assert getattr(res, name).size == n_rows
    assert res.min_headway == res.headway.min()
    np.testing.assert_allclose(res.headway,
                               res.gap / np.maximum(res.ego_speed, 0.1),
                               rtol=1e-15)
    assert float(np.abs(res.ego_accel).max()) <= ACCEL_RANGE[1]


def test_wrong_style_is_a_cycle_without_fixed_points() -> None:
    mapping = {s: wrong_style(s) for s in Style}
    assert mapping[Style.AGGRESSIVE] is Style.CONSERVATIVE
    assert mapping[Style.NORMAL] is Style.AGGRESSIVE
    assert mapping[Style.CONSERVATIVE] is Style.NORMAL
    assert set(mapping.values()) == set(Style)
    assert all(s is not w for s, w in mapping.items())
