"""Rule-based driving-style tagging from projected time headway.

Each timestep both vehicles are propagated at constant acceleration over a
short horizon; the projected headway lands in one of three bands (boundaries
derived from goal headways) and yields a one- or two-style tag.  Per-episode
tag ratios give the driver a single label, and dataset-level statistics
summarize acceleration/headway distributions per style.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyDataset
from .styles import STYLE_ORDER, Style
from .trajectory import EpisodeTrace

_PROJECTION_SPEED_FLOOR = 0.1  # m/s


@dataclass(frozen=True)
class ClassifierObservation:
    """Instantaneous car-following situation fed to the tagging rule."""

    headway: float
    rel_velocity: float  # lead speed - ego speed, m/s
    ego_accel: float
    lead_accel: float
    ego_speed: float
    gap: float

    def __post_init__(self):
        if self.headway <= 0.0 or self.ego_speed <= 0.0 or self.gap <= 0.0:
            raise ValueError("headway, ego_speed and gap must be > 0")


@dataclass(frozen=True)
class RuleConfig:
    """Projection horizon, style boundaries, and dead-bands.

    Boundaries are the midpoints between adjacent goal headways
    (1.0 / 1.5 / 1.8 s -> 1.25 and 1.65 s).  Projected headways within
    double_band of a boundary carry both adjacent styles.
    """

    horizon_s: float = 5.0
    boundary_low: float = 1.25
    boundary_high: float = 1.65
    double_band: float = 0.10
    dead_band_v: float = 0.05
    dead_band_a: float = 0.05

    def __post_init__(self):
        if self.horizon_s <= 0.0:
            raise ValueError("horizon must be > 0")
        if not 0.0 < self.boundary_low < self.boundary_high:
            raise ValueError("boundaries must satisfy 0 < low < high")
        if self.double_band < 0.0 or self.double_band * 2.0 >= self.boundary_high - self.boundary_low:
            raise ValueError("double_band must be >= 0 and below half the boundary spacing")
        if self.dead_band_v < 0.0 or self.dead_band_a < 0.0:
            raise ValueError("dead-bands must be >= 0")

    def to_dict(self) -> dict[str, float]:
        return {
            "horizon_s": self.horizon_s,
            "boundary_low": self.boundary_low,
            "boundary_high": self.boundary_high,
            "double_band": self.double_band,
            "dead_band_v": self.dead_band_v,
            "dead_band_a": self.dead_band_a,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RuleConfig":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class StyleTag:
    """One or two adjacent styles for a single timestep."""

    tags: frozenset[Style]

    def __post_init__(self):
        if not 1 <= len(self.tags) <= 2:
            raise ValueError("a tag holds one or two styles")
        if self.tags == frozenset({Style.AGGRESSIVE, Style.CONSERVATIVE}):
            raise ValueError("non-adjacent double tag")

    def __contains__(self, style: Style) -> bool:
        return style in self.tags


@dataclass(frozen=True)
class StyleProfile:
    """Per-episode tag ratios and the argmax label (ties go to Normal)."""

    ratios: dict[Style, float]
    label: Style
    n_steps: int


def _floored_state(v0: float, a: float, t: float) -> tuple[float, float]:
    """Displacement and speed after t seconds of constant accel with the
    speed floored at the projection floor."""
    floor = _PROJECTION_SPEED_FLOOR
    if a == 0.0:
        v = max(v0, floor)
        return v * t, v
    if a > 0.0:
        if v0 >= floor:
            return v0 * t + 0.5 * a * t * t, v0 + a * t
        t_f = (floor - v0) / a  # floored until speed climbs past the floor
        if t <= t_f:
            return floor * t, floor
        tau = t - t_f
        return floor * t_f + floor * tau + 0.5 * a * tau * tau, floor + a * tau
    # a < 0: floored after the speed decays to the floor
    if v0 <= floor:
        return floor * t, floor
    t_f = (v0 - floor) / -a
    if t <= t_f:
        return v0 * t + 0.5 * a * t * t, v0 + a * t
    return v0 * t_f + 0.5 * a * t_f * t_f + floor * (t - t_f), floor


def _floor_times(v0: float, a: float, horizon: float) -> list[float]:
    """Interior times where the speed trajectory meets the floor."""
    floor = _PROJECTION_SPEED_FLOOR
    if a > 0.0 and v0 < floor:
        t = (floor - v0) / a
    elif a < 0.0 and v0 > floor:
        t = (v0 - floor) / -a
    else:
        return []
    return [t] if 0.0 < t < horizon else []


def project_headway(obs: ClassifierObservation, horizon: float) -> float:
    """Projected time headway after propagating both vehicles at constant
    acceleration for `horizon` seconds (speeds floored at 0.1 m/s).

    Returns 0 if the projected gap touches zero at any time in [0, horizon].
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be > 0")
    ego_v = obs.ego_speed
    lead_v = obs.ego_speed + obs.rel_velocity
    breaks = sorted(
        {0.0, horizon}
        | set(_floor_times(lead_v, obs.lead_accel, horizon))
        | set(_floor_times(ego_v, obs.ego_accel, horizon))
    )
    for t0, t1 in zip(breaks[:-1], breaks[1:]):
        dl0, vl0 = _floored_state(lead_v, obs.lead_accel, t0)
        de0, ve0 = _floored_state(ego_v, obs.ego_accel, t0)
        gap0 = obs.gap + dl0 - de0
        # Effective per-segment coefficients: a vehicle whose raw speed sits
        # below the floor mid-segment is pinned there and moves linearly.
        t_mid = 0.5 * (t0 + t1)
        al = obs.lead_accel if lead_v + obs.lead_accel * t_mid > _PROJECTION_SPEED_FLOOR else 0.0
        ae = obs.ego_accel if ego_v + obs.ego_accel * t_mid > _PROJECTION_SPEED_FLOOR else 0.0
        dv = vl0 - ve0
        da = al - ae
        span = t1 - t0
        candidates = [0.0, span]
        if da != 0.0:
            vertex = -dv / da
            if 0.0 < vertex < span:
                candidates.append(vertex)
        for tau in candidates:
            if gap0 + dv * tau + 0.5 * da * tau * tau <= 0.0:
                return 0.0
    dl, _ = _floored_state(lead_v, obs.lead_accel, horizon)
    de, ve = _floored_state(ego_v, obs.ego_accel, horizon)
    gap_h = obs.gap + dl - de
    return gap_h / ve


def tag_timestep(obs: ClassifierObservation, rules: RuleConfig = RuleConfig()) -> StyleTag:
    """Tag one timestep with one or two adjacent styles.

    Near-zero relative speed and near-zero accelerations (within the
    dead-bands) are treated as exactly steady before projecting.
    """
    rel_v = 0.0 if abs(obs.rel_velocity) <= rules.dead_band_v else obs.rel_velocity
    lead_a = 0.0 if abs(obs.lead_accel) <= rules.dead_band_a else obs.lead_accel
    ego_a = 0.0 if abs(obs.ego_accel) <= rules.dead_band_a else obs.ego_accel
    adjusted = ClassifierObservation(
        headway=obs.headway,
        rel_velocity=rel_v,
        ego_accel=ego_a,
        lead_accel=lead_a,
        ego_speed=obs.ego_speed,
        gap=obs.gap,
    )
    proj = project_headway(adjusted, rules.horizon_s)
    if abs(proj - rules.boundary_low) <= rules.double_band:
        return StyleTag(frozenset({Style.AGGRESSIVE, Style.NORMAL}))
    if abs(proj - rules.boundary_high) <= rules.double_band:
        return StyleTag(frozenset({Style.NORMAL, Style.CONSERVATIVE}))
    if proj < rules.boundary_low:
        return StyleTag(frozenset({Style.AGGRESSIVE}))
    if proj < rules.boundary_high:
        return StyleTag(frozenset({Style.NORMAL}))
    return StyleTag(frozenset({Style.CONSERVATIVE}))


def observation_at(episode: EpisodeTrace, index: int) -> ClassifierObservation:
    """Build the tagging observation for one episode step."""
    gap = float(episode.lead_pos[index] - episode.ego_pos[index])
    ego_speed = float(episode.ego_speed[index])
    return ClassifierObservation(
        headway=gap / ego_speed,
        rel_velocity=float(episode.lead_speed[index]) - ego_speed,
        ego_accel=float(episode.ego_accel[index]),
        lead_accel=float(episode.lead_accel[index]),
        ego_speed=ego_speed,
        gap=gap,
    )


def tag_episode(episode: EpisodeTrace, rules: RuleConfig = RuleConfig()) -> list[StyleTag]:
    return [tag_timestep(observation_at(episode, i), rules) for i in range(episode.n_steps)]


def classify_driver(episode: EpisodeTrace, rules: RuleConfig = RuleConfig()) -> StyleProfile:
    """Label a whole episode from its per-step tags.

    Ratios count double tags toward both styles, so they can sum past 1.
    The label is the ratio argmax; any tie for the top goes to Normal.
    """
    tags = tag_episode(episode, rules)
    counts = {style: 0 for style in STYLE_ORDER}
    for tag in tags:
        for style in STYLE_ORDER:
            if style in tag:
                counts[style] += 1
    n = len(tags)
    ratios = {style: counts[style] / n for style in STYLE_ORDER}
    top = max(counts.values())
    winners = [style for style in STYLE_ORDER if counts[style] == top]
    label = winners[0] if len(winners) == 1 else Style.NORMAL
    return StyleProfile(ratios=ratios, label=label, n_steps=n)


# ---- dataset statistics ----

HIST_BIN_WIDTH = 0.1


@dataclass
class StyleHistogram:
    """Fixed-width histogram over bins [k*w, (k+1)*w)."""

    bin_width: float
    bin_left_edges: np.ndarray
    counts: np.ndarray

    @property
    def mode(self) -> float:
        """Center of the first most-populated bin."""
        k = int(np.argmax(self.counts))
        return float(self.bin_left_edges[k] + 0.5 * self.bin_width)


@dataclass
class StyleSummary:
    count: int
    accel_hist: StyleHistogram
    headway_hist: StyleHistogram
    braking_fraction: float
    accelerating_fraction: float


def _histogram(values: np.ndarray, width: float) -> StyleHistogram:
    idx = np.floor(values / width).astype(np.int64)
    lo, hi = int(idx.min()), int(idx.max())
    edges = np.arange(lo, hi + 1, dtype=np.float64) * width
    counts = np.bincount(idx - lo, minlength=hi - lo + 1)
    return StyleHistogram(bin_width=width, bin_left_edges=edges, counts=counts)


def style_statistics(
    episodes: Sequence[EpisodeTrace],
    tags_per_episode: Sequence[Sequence[StyleTag]],
) -> dict[Style, StyleSummary]:
    """Aggregate tagged steps across a dataset, per style.

    A step tagged with two styles contributes to both.  Styles with no
    tagged steps are omitted from the result.
    """
    if not episodes or len(episodes) != len(tags_per_episode):
        raise EmptyDataset("need a non-empty matched set of episodes and tags")
    accel: dict[Style, list[float]] = {s: [] for s in STYLE_ORDER}
    hw: dict[Style, list[float]] = {s: [] for s in STYLE_ORDER}
    total = 0
    for episode, tags in zip(episodes, tags_per_episode):
        gaps = episode.gap()
        for i, tag in enumerate(tags):
            total += 1
            for style in STYLE_ORDER:
                if style in tag:
                    accel[style].append(float(episode.ego_accel[i]))
                    hw[style].append(float(gaps[i] / episode.ego_speed[i]))
    if total == 0:
        raise EmptyDataset("no tagged steps")
    out: dict[Style, StyleSummary] = {}
    for style in STYLE_ORDER:
        if not accel[style]:
            continue
        a = np.array(accel[style])
        h = np.array(hw[style])
        out[style] = StyleSummary(
            count=int(a.shape[0]),
            accel_hist=_histogram(a, HIST_BIN_WIDTH),
            headway_hist=_histogram(h, HIST_BIN_WIDTH),
            braking_fraction=float(np.mean(a < 0.0)),
            accelerating_fraction=float(np.mean(a > 0.0)),
        )
    return out
