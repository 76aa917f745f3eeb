"""Trace parsing, episode extraction, resampling, synthetic generation, CSV I/O."""

from __future__ import annotations

import io
import math

import numpy as np
import pytest

from carfollow.errors import (
    EmptyFile,
    MalformedRow,
    MissingColumn,
    NonIntegerDecimation,
)
from carfollow.kinematics import _step_scalar
from carfollow.styles import Style
from carfollow.trajectory import (
    DEFAULT_SCHEMA,
    EPISODE_COLUMNS,
    WORKING_DT,
    EpisodeTrace,
    FilterConfig,
    GeneratorConfig,
    RawFrame,
    VehicleClass,
    extract_follow_episodes,
    generate_synthetic_episode,
    parse_trace_file,
    read_episode_csv,
    resample_episode,
    write_episode_csv,
)
from conftest import make_constant_trace

HEADER = "frame,id,x,xVelocity,xAcceleration,precedingId,laneId,class,width"


def _row(frame, vid, x, v, a, prec, lane=2, cls="Car", length=4.5):
    return f"{frame},{vid},{x},{v},{a},{prec},{lane},{cls},{length}"


# ------------------------------------------------------------------- parsing
def test_parse_single_row() -> None:
    text = HEADER + "\n" + _row(0, 1, 100.0, 20.0, 0.1, 2)
    frames = parse_trace_file(text)
    assert len(frames) == 1
    f = frames[0]
    assert isinstance(f, RawFrame)
    assert f.frame_index == 0 and f.vehicle_id == 1
    assert f.position_x == 100.0 and f.speed_x == 20.0 and f.accel_x == 0.1
    assert f.preceding_id == 2 and f.lane_id == 2
    assert f.vehicle_class is VehicleClass.CAR
    assert f.length == 4.5


def test_parse_accepts_stream_and_bytes() -> None:
    text = HEADER + "\n" + _row(0, 1, 0.0, 8.0, 0.0, 0)
    assert len(parse_trace_file(io.StringIO(text))) == 1
    assert len(parse_trace_file(text.encode())) == 1


def test_parse_missing_column() -> None:
    bad = HEADER.replace(",precedingId", "") + "\n0,1,0,8,0,2,Car,4"
    with pytest.raises(MissingColumn) as exc:
        parse_trace_file(bad)
    assert exc.value.column == "precedingId"


def test_parse_malformed_row_reports_line() -> None:
    text = HEADER + "\n" + _row(0, 1, 0.0, 8.0, 0.0, 0) + "\n0,1,abc,8,0,0,2,Car,4.5"
    with pytest.raises(MalformedRow) as exc:
        parse_trace_file(text)
    assert exc.value.line_no == 3  # header is line 1


def test_parse_empty_file() -> None:
    with pytest.raises(EmptyFile):
        parse_trace_file("")
    # header-only files parse to zero frames (not an error at this layer)
    assert parse_trace_file(HEADER) == []


def test_parse_skips_blank_rows() -> None:
    text = HEADER + "\n\n" + _row(0, 1, 0.0, 8.0, 0.0, 0) + "\n\n"
    assert len(parse_trace_file(text)) == 1


def test_parse_length_column_optional() -> None:
    header = "frame,id,x,xVelocity,xAcceleration,precedingId,laneId,class"
    frames = parse_trace_file(header + "\n0,1,0,8,0,0,2,Car")
    assert frames[0].length == 0.0


def test_raw_frame_validation() -> None:
    with pytest.raises(ValueError):
        RawFrame(-1, 1, 0.0, 1.0, 0.0, 0, 1, VehicleClass.CAR, 0.0)
    with pytest.raises(ValueError):
        RawFrame(0, 1, float("inf"), 1.0, 0.0, 0, 1, VehicleClass.CAR, 0.0)


# ---------------------------------------------------------------- extraction
def _follow_frames(n, dt=WORKING_DT, ego_speed=20.0, lead_speed=20.0, gap=30.0,
                   lead_id=2, start=0, ego_speed_fn=None, lead_length=0.0):
    """Frames for ego id=1 following lead id=`lead_id`, constant speeds."""
    frames = []
    for k in range(n):
        t = k * dt
        ve = ego_speed if ego_speed_fn is None else ego_speed_fn(k)
        frames.append(RawFrame(start + k, 1, ego_speed * t, ve, 0.0,
                               lead_id, 3, VehicleClass.CAR, 4.0))
        frames.append(RawFrame(start + k, lead_id, gap + lead_length + lead_speed * t,
                               lead_speed, 0.0, 0, 3, VehicleClass.CAR, lead_length))
    return frames


def test_extract_below_min_duration_yields_nothing() -> None:
    # 9 s of following (112 frames at 0.08) then the leader changes
    frames = _follow_frames(112)
    frames += _follow_frames(60, lead_id=5, start=112, gap=40.0)
    episodes = extract_follow_episodes(frames, FilterConfig())
    assert episodes == []


def test_extract_single_long_episode() -> None:
    frames = _follow_frames(250)
    stats: dict[str, int] = {}
    episodes = extract_follow_episodes(frames, FilterConfig(), stats=stats)
    assert len(episodes) == 1
    ep = episodes[0]
    assert ep.n_steps == 250
    assert ep.duration == pytest.approx(250 * WORKING_DT)
    assert ep.source == "recorded"
    assert ep.driver_id == 1
    np.testing.assert_allclose(ep.gap(), 30.0, rtol=0, atol=1e-9)
    assert stats["episodes"] == 1
    assert stats["frames"] == 500
    assert stats["spans"] >= 1


def test_extract_splits_on_speed_dip() -> None:
    # speed dips below the floor for 10 frames in the middle of 600
    def speed(k):
        return 5.0 if 280 <= k < 290 else 20.0

    frames = _follow_frames(600, ego_speed_fn=speed)
    episodes = extract_follow_episodes(frames, FilterConfig())
    # brute-force oracle over the eligibility mask
    eligible = [speed(k) >= 6.0 for k in range(600)]
    runs, cur = [], 0
    for e in eligible + [False]:
        cur = cur + 1 if e else (runs.append(cur) if cur else None) or 0
    expect = [r for r in runs if r >= 125]
    assert [ep.n_steps for ep in episodes] == expect
    assert len(episodes) == 2


def test_extract_splits_on_lead_change_and_frame_gap() -> None:
    frames = _follow_frames(130)
    frames += _follow_frames(130, lead_id=7, start=130, gap=50.0)
    # a frame gap splits a span even with the same leader
    frames += _follow_frames(130, lead_id=7, start=300, gap=50.0)
    episodes = extract_follow_episodes(frames, FilterConfig())
    assert [ep.n_steps for ep in episodes] == [130, 130, 130]


def test_extract_respects_class_filter() -> None:
    frames = []
    for k in range(250):
        t = k * WORKING_DT
        frames.append(RawFrame(k, 1, 20.0 * t, 20.0, 0.0, 2, 3, VehicleClass.TRUCK, 12.0))
        frames.append(RawFrame(k, 2, 30.0 + 20.0 * t, 20.0, 0.0, 0, 3, VehicleClass.CAR, 0.0))
    assert extract_follow_episodes(frames, FilterConfig()) == []
    allow = FilterConfig(allowed_classes=frozenset({VehicleClass.CAR, VehicleClass.TRUCK}))
    assert len(extract_follow_episodes(frames, allow)) == 1


def test_extract_subtracts_lead_length() -> None:
    frames = _follow_frames(250, lead_length=5.0)
    (ep,) = extract_follow_episodes(frames, FilterConfig())
    np.testing.assert_allclose(ep.gap(), 30.0, rtol=0, atol=1e-9)


def test_extract_idempotent_on_own_output() -> None:
    src = generate_synthetic_episode(Style.NORMAL, seed=3, duration=20.0)
    frames = []
    for k in range(src.n_steps):
        frames.append(RawFrame(k, 1, float(src.ego_pos[k]), float(src.ego_speed[k]),
                               float(src.ego_accel[k]), 2, 1, VehicleClass.CAR, 4.0))
        frames.append(RawFrame(k, 2, float(src.lead_pos[k]), float(src.lead_speed[k]),
                               float(src.lead_accel[k]), 0, 1, VehicleClass.CAR, 0.0))
    (ep,) = extract_follow_episodes(frames, FilterConfig(), dt=src.dt)
    for name in ("lead_pos", "lead_speed", "lead_accel", "ego_pos", "ego_speed", "ego_accel"):
        np.testing.assert_array_equal(getattr(ep, name), getattr(src, name))


# ---------------------------------------------------------------- resampling
def test_resample_decimates_by_two() -> None:
    ep = make_constant_trace(n=250, dt=0.04)
    out = resample_episode(ep, 0.08)
    assert out.n_steps == 125
    assert out.dt == 0.08
    np.testing.assert_array_equal(out.ego_speed, ep.ego_speed[::2])
    np.testing.assert_array_equal(out.lead_pos, ep.lead_pos[::2])


def test_resample_identity_returns_same_object() -> None:
    ep = make_constant_trace(n=130, dt=0.08)
    assert resample_episode(ep, 0.08) is ep


def test_resample_non_integer_ratio_raises() -> None:
    ep = make_constant_trace(n=300, dt=0.04)
    with pytest.raises(NonIntegerDecimation):
        resample_episode(ep, 0.1)


def test_resample_rejects_upsampling() -> None:
    ep = make_constant_trace(n=130, dt=0.08)
    with pytest.raises(NonIntegerDecimation):
        resample_episode(ep, 0.04)


def test_resample_composition() -> None:
    ep = make_constant_trace(n=4000, dt=0.01)
    two_hops = resample_episode(resample_episode(ep, 0.02), 0.04)
    one_hop = resample_episode(ep, 0.04)
    assert two_hops.n_steps == one_hop.n_steps
    np.testing.assert_array_equal(two_hops.ego_pos, one_hop.ego_pos)


# ------------------------------------------------------------ trace validity
def test_trace_too_short_raises() -> None:
    with pytest.raises(ValueError):
        make_constant_trace(n=124, dt=0.08)  # 9.92 s < 10 s


def test_trace_lead_must_be_ahead() -> None:
    with pytest.raises(ValueError):
        make_constant_trace(gap=0.0)


def test_recorded_trace_enforces_speed_floor() -> None:
    with pytest.raises(ValueError):
        make_constant_trace(speed=5.9, lead_speed=20.0, source="recorded")
    # synthetic traces may go below the recorded-data floor
    make_constant_trace(speed=5.9, lead_speed=20.0, source="synthetic")


def test_trace_rejects_non_finite() -> None:
    ep = make_constant_trace()
    bad = ep.ego_speed.copy()
    bad[3] = float("nan")
    with pytest.raises(ValueError):
        EpisodeTrace(dt=ep.dt, lead_pos=ep.lead_pos, lead_speed=ep.lead_speed,
                     lead_accel=ep.lead_accel, ego_pos=ep.ego_pos,
                     ego_speed=bad, ego_accel=ep.ego_accel, source="synthetic")


def test_trace_gap_and_headway_methods() -> None:
    ep = make_constant_trace(gap=30.0, speed=20.0)
    np.testing.assert_allclose(ep.gap(), 30.0, rtol=0, atol=1e-9)
    np.testing.assert_allclose(ep.time_headway(), 1.5, rtol=0, atol=1e-9)


# ----------------------------------------------------------------- generator
def test_generator_deterministic() -> None:
    a = generate_synthetic_episode(Style.NORMAL, seed=7, duration=20.0)
    b = generate_synthetic_episode(Style.NORMAL, seed=7, duration=20.0)
    for name in ("lead_pos", "lead_speed", "lead_accel", "ego_pos", "ego_speed", "ego_accel"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.style is Style.NORMAL and a.source == "synthetic"


def test_generator_styles_differ_and_seed_matters() -> None:
    a = generate_synthetic_episode(Style.NORMAL, seed=7, duration=20.0)
    b = generate_synthetic_episode(Style.AGGRESSIVE, seed=7, duration=20.0)
    c = generate_synthetic_episode(Style.NORMAL, seed=8, duration=20.0)
    assert not np.array_equal(a.ego_speed, b.ego_speed)
    assert not np.array_equal(a.ego_speed, c.ego_speed)


def test_generator_headway_ordering_same_seed() -> None:
    agg = generate_synthetic_episode(Style.AGGRESSIVE, seed=11, duration=60.0)
    con = generate_synthetic_episode(Style.CONSERVATIVE, seed=11, duration=60.0)
    assert float(np.mean(agg.time_headway())) < float(np.mean(con.time_headway()))


def test_generator_rejects_short_duration() -> None:
    with pytest.raises(ValueError):
        generate_synthetic_episode(Style.NORMAL, seed=1, duration=5.0)


def test_generator_respects_config_bounds() -> None:
    cfg = GeneratorConfig()
    ep = generate_synthetic_episode(Style.CONSERVATIVE, seed=4, duration=30.0, config=cfg)
    assert float(ep.lead_speed.min()) >= cfg.speed_lo - 1e-9
    assert float(ep.lead_speed.max()) <= cfg.speed_hi + 1e-9
    assert float(np.abs(ep.lead_accel).max()) <= cfg.lead_accel_max + 1e-12
    assert float(np.abs(ep.ego_accel).max()) <= 4.0 + 1e-12
    assert float(ep.gap().min()) > 0.0


def test_generator_config_rejects_extreme_lead_accel() -> None:
    with pytest.raises(ValueError):
        GeneratorConfig(lead_accel_max=2.5)


def test_generator_replay_is_bit_exact() -> None:
    """Stored accelerations must reproduce stored positions via the integrator."""
    ep = generate_synthetic_episode(Style.AGGRESSIVE, seed=2, duration=15.0)
    for pos_arr, spd_arr, acc_arr in (
        (ep.ego_pos, ep.ego_speed, ep.ego_accel),
        (ep.lead_pos, ep.lead_speed, ep.lead_accel),
    ):
        pos, spd = float(pos_arr[0]), float(spd_arr[0])
        for k in range(ep.n_steps - 1):
            pos, spd = _step_scalar(pos, spd, float(acc_arr[k]), ep.dt)
            assert pos == pos_arr[k + 1]
            assert spd == spd_arr[k + 1]


# -------------------------------------------------------------------- CSV IO
def test_episode_csv_round_trip(tmp_path) -> None:
    ep = generate_synthetic_episode(Style.CONSERVATIVE, seed=9, duration=12.0, driver_id=42)
    path = tmp_path / "ep.csv"
    write_episode_csv(ep, path)
    back = read_episode_csv(path)
    assert back.dt == ep.dt
    assert back.driver_id == 42
    assert back.source == "synthetic"
    assert back.style is Style.CONSERVATIVE
    for name in ("lead_pos", "lead_speed", "lead_accel", "ego_pos", "ego_speed", "ego_accel"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ep, name))


def test_episode_csv_header_shape(tmp_path) -> None:
    ep = make_constant_trace()
    path = tmp_path / "ep.csv"
    write_episode_csv(ep, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert "dt=" in lines[0] and "source=" in lines[0]
    assert lines[1] == ",".join(EPISODE_COLUMNS)
    assert len(lines) == 2 + ep.n_steps


def test_episode_csv_rejects_empty(tmp_path) -> None:
    path = tmp_path / "empty.csv"
    path.write_text("# dt=0.08 driver_id=0 source=synthetic style=-\n"
                    + ",".join(EPISODE_COLUMNS) + "\n")
    with pytest.raises(EmptyFile):
        read_episode_csv(path)
