"""Trajectory ingestion: raw drone-recording frames to clean follow episodes.

Covers CSV parsing against a configurable column map, extraction of
constant-leader car-following episodes under quality filters, decimation to
the working step size, a seeded synthetic episode generator (IDM ego behind a
piecewise-smooth lead), and episode CSV round-tripping.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import baselines
from .errors import EmptyFile, MalformedRow, MissingColumn, NonIntegerDecimation
from .kinematics import _step_scalar
from .styles import STYLE_CODE, Style

WORKING_DT = 0.08  # seconds; the step size every downstream module assumes

# Ego speed floor baked into the recorded-episode type (m/s).
RECORDED_SPEED_FLOOR = 6.0

_TOL = 1e-9


class VehicleClass(enum.Enum):
    CAR = "car"
    TRUCK = "truck"

    @classmethod
    def from_string(cls, text: str) -> "VehicleClass":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown vehicle class {text!r}") from None


# Canonical field -> source column for the common drone-recording layout.
DEFAULT_SCHEMA: dict[str, str] = {
    "frame_index": "frame",
    "vehicle_id": "id",
    "position_x": "x",
    "speed_x": "xVelocity",
    "accel_x": "xAcceleration",
    "preceding_id": "precedingId",
    "lane_id": "laneId",
    "vehicle_class": "class",
    "length": "width",  # optional; bounding-box extent along x
}

_REQUIRED_FIELDS = (
    "frame_index",
    "vehicle_id",
    "position_x",
    "speed_x",
    "accel_x",
    "preceding_id",
    "lane_id",
    "vehicle_class",
)


@dataclass(frozen=True)
class RawFrame:
    """One vehicle at one recording frame, in source coordinates."""

    frame_index: int
    vehicle_id: int
    position_x: float
    speed_x: float
    accel_x: float
    preceding_id: int
    lane_id: int
    vehicle_class: VehicleClass
    length: float = 0.0

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        for v in (self.position_x, self.speed_x, self.accel_x, self.length):
            if not math.isfinite(v):
                raise ValueError("frame values must be finite")


@dataclass(frozen=True)
class FilterConfig:
    """Quality gates for follow-episode extraction.

    min_speed is the split threshold; note the recorded-episode type floors
    ego speed at 6 m/s, so values below 6 risk spans the episode constructor
    rejects.
    """

    min_duration: float = 10.0
    min_speed: float = 6.0
    require_constant_lead: bool = True
    require_no_lane_change: bool = True
    allowed_classes: frozenset[VehicleClass] = frozenset({VehicleClass.CAR})

    def __post_init__(self):
        if self.min_duration <= 0.0:
            raise ValueError("min_duration must be > 0")
        if self.min_speed < 0.0:
            raise ValueError("min_speed must be >= 0")
        if not self.allowed_classes:
            raise ValueError("allowed_classes must not be empty")


@dataclass
class EpisodeTrace:
    """A clean car-following span at uniform dt: lead and ego kinematics.

    Positions are bumper-to-bumper compatible: lead_pos already has the
    leader's length absorbed, so gap = lead_pos - ego_pos.
    """

    dt: float
    lead_pos: np.ndarray
    lead_speed: np.ndarray
    lead_accel: np.ndarray
    ego_pos: np.ndarray
    ego_speed: np.ndarray
    ego_accel: np.ndarray
    driver_id: int = 0
    source: str = "recorded"  # "recorded" | "synthetic"
    style: Style | None = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.source not in ("recorded", "synthetic"):
            raise ValueError(f"unknown source {self.source!r}")
        for name in ("lead_pos", "lead_speed", "lead_accel", "ego_pos", "ego_speed", "ego_accel"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        arrays = [self.lead_pos, self.lead_speed, self.lead_accel, self.ego_pos, self.ego_speed, self.ego_accel]
        n = arrays[0].shape[0]
        if any(a.ndim != 1 or a.shape[0] != n for a in arrays):
            raise ValueError("all channel arrays must be 1-D and the same length")
        min_len = math.ceil(10.0 / self.dt - _TOL)
        if n < min_len:
            raise ValueError(f"episode must span >= 10 s ({min_len} steps at dt={self.dt}), got {n}")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("episode channels must be finite")
        if np.any(self.lead_pos - self.ego_pos <= 0.0):
            raise ValueError("lead must stay strictly ahead of ego")
        if self.source == "recorded" and np.any(self.ego_speed < RECORDED_SPEED_FLOOR - _TOL):
            raise ValueError(f"recorded episodes require ego speed >= {RECORDED_SPEED_FLOOR} m/s")

    @property
    def n_steps(self) -> int:
        return int(self.lead_pos.shape[0])

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def gap(self) -> np.ndarray:
        return self.lead_pos - self.ego_pos

    def time_headway(self) -> np.ndarray:
        return self.gap() / self.ego_speed


# ---- parsing ----


def parse_trace_file(source: str | bytes | io.TextIOBase, schema: Mapping[str, str] | None = None) -> list[RawFrame]:
    """Parse one trajectory CSV into RawFrames.

    Args:
        source: CSV text, bytes, or an open text stream.  The first row must
            be a header.
        schema: canonical field -> source column map; defaults to the common
            drone-recording layout.  The optional "length" mapping is used
            when its column is present and otherwise ignored.

    Raises:
        EmptyFile: no header row at all.
        MissingColumn: a required mapped column is absent from the header.
        MalformedRow: a data row fails to parse (line numbers count the
            header as line 1).
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyFile("trajectory file has no header row") from None
    header = [h.strip() for h in header]
    col_index: dict[str, int] = {}
    for fld in _REQUIRED_FIELDS:
        col = schema.get(fld)
        if col is None:
            raise MissingColumn(fld)
        if col not in header:
            raise MissingColumn(col)
        col_index[fld] = header.index(col)
    length_col = schema.get("length")
    length_index = header.index(length_col) if length_col in header else None

    frames: list[RawFrame] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            frames.append(
                RawFrame(
                    frame_index=int(float(row[col_index["frame_index"]])),
                    vehicle_id=int(float(row[col_index["vehicle_id"]])),
                    position_x=float(row[col_index["position_x"]]),
                    speed_x=float(row[col_index["speed_x"]]),
                    accel_x=float(row[col_index["accel_x"]]),
                    preceding_id=int(float(row[col_index["preceding_id"]])),
                    lane_id=int(float(row[col_index["lane_id"]])),
                    vehicle_class=VehicleClass.from_string(row[col_index["vehicle_class"]]),
                    length=float(row[length_index]) if length_index is not None else 0.0,
                )
            )
        except (ValueError, IndexError) as exc:
            raise MalformedRow(line_no, str(exc)) from None
    return frames


# ---- extraction ----


def extract_follow_episodes(
    frames: Iterable[RawFrame],
    config: FilterConfig = FilterConfig(),
    dt: float = WORKING_DT,
    stats: dict | None = None,
) -> list[EpisodeTrace]:
    """Cut maximal clean car-following spans out of a frame stream.

    A frame belongs to a span when the ego has a leader present in the same
    frame, both vehicles' classes are allowed, ego speed clears min_speed,
    the bumper-to-bumper gap is positive, frame indices are consecutive, and
    (when required) leader and lane stay constant.  Any violation ends the
    current span; surviving sub-spans of at least min_duration become
    episodes, so one ego can contribute several.

    Args:
        frames: RawFrames sorted by (vehicle_id, frame_index).
        config: quality gates.
        dt: the recording step the frames are spaced at.
        stats: optional dict filled with ingest bookkeeping — total frames,
            frames passing the quality gates, spans found, and spans dropped
            for falling short of min_duration.
    """
    frame_list = list(frames)
    lookup: dict[tuple[int, int], RawFrame] = {(f.vehicle_id, f.frame_index): f for f in frame_list}
    by_vehicle: dict[int, list[RawFrame]] = {}
    for f in frame_list:
        by_vehicle.setdefault(f.vehicle_id, []).append(f)

    min_steps = math.ceil(config.min_duration / dt - _TOL)
    episodes: list[EpisodeTrace] = []
    tally = {"frames": len(frame_list), "frames_eligible": 0, "spans": 0, "spans_too_short": 0}

    def flush(run: list[tuple[RawFrame, RawFrame]], ego_id: int) -> None:
        if not run:
            return
        tally["spans"] += 1
        if len(run) < min_steps:
            tally["spans_too_short"] += 1
            return
        episodes.append(
            EpisodeTrace(
                dt=dt,
                lead_pos=np.array([lf.position_x - lf.length for _, lf in run]),
                lead_speed=np.array([lf.speed_x for _, lf in run]),
                lead_accel=np.array([lf.accel_x for _, lf in run]),
                ego_pos=np.array([ef.position_x for ef, _ in run]),
                ego_speed=np.array([ef.speed_x for ef, _ in run]),
                ego_accel=np.array([ef.accel_x for ef, _ in run]),
                driver_id=ego_id,
                source="recorded",
            )
        )

    for ego_id, ego_frames in by_vehicle.items():
        run: list[tuple[RawFrame, RawFrame]] = []
        run_lead: int | None = None
        run_lane: int | None = None
        prev_index: int | None = None
        for ef in ego_frames:
            lead = lookup.get((ef.preceding_id, ef.frame_index)) if ef.preceding_id != 0 else None
            ok = (
                ef.preceding_id != 0
                and lead is not None
                and ef.vehicle_class in config.allowed_classes
                and lead.vehicle_class in config.allowed_classes
                and ef.speed_x >= config.min_speed
                and (lead.position_x - lead.length) - ef.position_x > 0.0
            )
            if run and ok:
                if ef.frame_index != prev_index + 1:
                    flush(run, ego_id)
                    run = []
                elif config.require_constant_lead and ef.preceding_id != run_lead:
                    flush(run, ego_id)
                    run = []
                elif config.require_no_lane_change and ef.lane_id != run_lane:
                    flush(run, ego_id)
                    run = []
            if ok:
                tally["frames_eligible"] += 1
                if not run:
                    run_lead = ef.preceding_id
                    run_lane = ef.lane_id
                run.append((ef, lead))
            elif run:
                flush(run, ego_id)
                run = []
            prev_index = ef.frame_index
        flush(run, ego_id)
    tally["episodes"] = len(episodes)
    if stats is not None:
        stats.update(tally)
    return episodes


def resample_episode(episode: EpisodeTrace, target_dt: float) -> EpisodeTrace:
    """Decimate an episode to a coarser step; target_dt must be an integer
    multiple of the source dt.  Identity when the ratio is 1."""
    if target_dt <= 0.0:
        raise ValueError("target_dt must be > 0")
    ratio = target_dt / episode.dt
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9:
        raise NonIntegerDecimation(f"target dt {target_dt} is not an integer multiple of {episode.dt}")
    if k == 1:
        return episode
    return EpisodeTrace(
        dt=target_dt,
        lead_pos=episode.lead_pos[::k].copy(),
        lead_speed=episode.lead_speed[::k].copy(),
        lead_accel=episode.lead_accel[::k].copy(),
        ego_pos=episode.ego_pos[::k].copy(),
        ego_speed=episode.ego_speed[::k].copy(),
        ego_accel=episode.ego_accel[::k].copy(),
        driver_id=episode.driver_id,
        source=episode.source,
        style=episode.style,
    )


# ---- synthetic generation ----


# Free IDM parameters (desired speed, standstill gap) for the synthetic ego,
# per style.  The time gap is fixed by the style; these two are chosen so the
# equilibrium time headway lands mid-band for the rule classifier across the
# whole 14-28 m/s speed range: aggressive ~1.0 s, normal ~1.52 s,
# conservative ~2.02 s.
_STYLE_IDM_FREE: dict[Style, tuple[float, float]] = {
    Style.AGGRESSIVE: (50.0, 1.5),
    Style.NORMAL: (80.0, 0.3),
    Style.CONSERVATIVE: (80.0, 0.3),
}


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic episode generator.

    The per-style ego follows an IDM whose time gap is fixed by the style
    ({0.9, 1.5, 2.0} s) and whose remaining free parameters are chosen so
    each style's equilibrium headway sits inside its classifier band.
    """

    dt: float = WORKING_DT
    a_max: float = 1.5
    b_comf: float = 1.67
    speed_lo: float = 14.0
    speed_hi: float = 28.0
    lead_accel_max: float = 0.8
    segment_lo: float = 3.0
    segment_hi: float = 6.0
    noise_sigma: float = 0.05

    def __post_init__(self):
        if self.lead_accel_max > 2.0:
            raise ValueError("lead accel profile must stay within +-2 m/s^2")
        if not (0.0 < self.speed_lo < self.speed_hi):
            raise ValueError("speed band must satisfy 0 < lo < hi")

    def idm_for(self, style: Style) -> baselines.IdmParams:
        v0, s0 = _STYLE_IDM_FREE[style]
        return baselines.IdmParams(
            v0=v0,
            time_gap=baselines.style_defaults(style).time_gap,
            s0=s0,
            a_max=self.a_max,
            b_comf=self.b_comf,
        )


def generate_synthetic_episode(
    style: Style,
    seed: int,
    duration: float,
    *,
    config: GeneratorConfig = GeneratorConfig(),
    driver_id: int = 0,
) -> EpisodeTrace:
    """One seeded synthetic follow episode for a driving style.

    The lead runs a bounded piecewise-constant-acceleration speed profile;
    the ego applies style IDM acceleration plus zero-mean Gaussian noise
    (sigma 0.05 m/s^2) and integrates with the shared motion step, so
    replaying the stored ego accelerations reproduces the stored positions
    bit-exactly.  Same (style, seed, duration) -> bit-identical episode.
    """
    if duration < 10.0:
        raise ValueError("duration must be >= 10 s")
    dt = config.dt
    n = round(duration / dt)
    rng = np.random.default_rng(np.random.SeedSequence([STYLE_CODE[style], int(seed)]))

    lead_pos = np.empty(n)
    lead_speed = np.empty(n)
    lead_accel = np.empty(n)
    v = float(rng.uniform(config.speed_lo + 2.0, config.speed_hi - 2.0))
    pos = 0.0
    remaining = 0
    a_seg = 0.0
    for k in range(n):
        if remaining == 0:
            a_seg = float(rng.uniform(-config.lead_accel_max, config.lead_accel_max))
            remaining = max(1, round(float(rng.uniform(config.segment_lo, config.segment_hi)) / dt))
        a = a_seg
        v_next = v + a * dt
        if v_next < config.speed_lo or v_next > config.speed_hi:
            a = 0.0
        lead_pos[k] = pos
        lead_speed[k] = v
        lead_accel[k] = a
        pos, v = _step_scalar(pos, v, a, dt)
        remaining -= 1

    params = config.idm_for(style)
    gap0 = baselines.equilibrium_gap(params, float(lead_speed[0]))
    ego_pos = np.empty(n)
    ego_speed = np.empty(n)
    ego_accel = np.empty(n)
    ep = float(lead_pos[0]) - gap0
    ev = float(lead_speed[0])
    for k in range(n):
        gap = float(lead_pos[k]) - ep
        a_idm = baselines.idm_accel(params, ev, ev - float(lead_speed[k]), gap)
        a = a_idm + float(rng.normal(0.0, config.noise_sigma))
        a = min(baselines.ACCEL_RANGE[1], max(baselines.ACCEL_RANGE[0], a))
        ego_pos[k] = ep
        ego_speed[k] = ev
        ego_accel[k] = a
        if k < n - 1:
            ep, ev = _step_scalar(ep, ev, a, dt)
    return EpisodeTrace(
        dt=dt,
        lead_pos=lead_pos,
        lead_speed=lead_speed,
        lead_accel=lead_accel,
        ego_pos=ego_pos,
        ego_speed=ego_speed,
        ego_accel=ego_accel,
        driver_id=driver_id,
        source="synthetic",
        style=style,
    )


# ---- episode CSV round-trip ----

EPISODE_COLUMNS = ("t", "lead_pos", "lead_speed", "lead_accel", "ego_pos", "ego_speed", "ego_accel")


def write_episode_csv(episode: EpisodeTrace, path: str | Path, comment_lines: Iterable[str] = ()) -> None:
    from .configio import fmt

    lines = list(comment_lines)
    style = episode.style.value if episode.style is not None else "-"
    lines.append(
        f"# dt={fmt(episode.dt)} driver_id={episode.driver_id} source={episode.source} style={style}"
    )
    lines.append(",".join(EPISODE_COLUMNS))
    for k in range(episode.n_steps):
        row = (
            k * episode.dt,
            episode.lead_pos[k],
            episode.lead_speed[k],
            episode.lead_accel[k],
            episode.ego_pos[k],
            episode.ego_speed[k],
            episode.ego_accel[k],
        )
        lines.append(",".join(fmt(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_episode_csv(path: str | Path) -> EpisodeTrace:
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    for line in Path(path).read_text().splitlines():
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    k, v = token.split("=", 1)
                    meta.setdefault(k, v)
            continue
        cells = line.split(",")
        if header is None:
            header = cells
            if tuple(header) != EPISODE_COLUMNS:
                raise ValueError(f"unexpected episode columns in {path}")
        else:
            rows.append([float(c) for c in cells])
    if header is None or not rows:
        raise EmptyFile(f"no episode data in {path}")
    data = np.array(rows, dtype=np.float64)
    style = meta.get("style", "-")
    return EpisodeTrace(
        dt=float(meta["dt"]),
        lead_pos=data[:, 1],
        lead_speed=data[:, 2],
        lead_accel=data[:, 3],
        ego_pos=data[:, 4],
        ego_speed=data[:, 5],
        ego_accel=data[:, 6],
        driver_id=int(meta.get("driver_id", "0")),
        source=meta.get("source", "recorded"),
        style=None if style == "-" else Style.from_string(style),
    )
