"""Constrained car-following decision process.

The lead vehicle replays a recorded or synthetic trace open-loop while the
ego vehicle integrates the agent's commanded acceleration.  Each transition
yields a human-similarity reward (closeness to a frozen per-style regressor's
prediction), a comfort reward (jerk penalty), and a binary safety cost that
flags headway dropping below a minimum threshold.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import StepAfterDone, TraceTooShort
from .kinematics import ActionLimits, _step_scalar, clamp_action
from .trajectory import EpisodeTrace

STATE_DIM = 6
STATE_FIELDS = ("lead_accel", "headway", "ego_speed", "rel_velocity", "prev_action", "cost_indicator")
HEADWAY_SPEED_FLOOR = 0.1
HEADWAY_CAP = 30.0
MIN_EPISODE_STEPS = 125

ROLLOUT_COLUMNS = (
    "t",
    "lead_accel",
    "ego_accel_applied",
    "predicted_accel",
    "headway",
    "ego_speed",
    "rel_velocity",
    "r_h",
    "r_c",
    "cost",
)


@dataclass(frozen=True)
class CmdpState:
    lead_accel: float
    headway: float
    ego_speed: float
    rel_velocity: float
    prev_action: float
    cost_indicator: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.lead_accel,
                self.headway,
                self.ego_speed,
                self.rel_velocity,
                self.prev_action,
                self.cost_indicator,
            ],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "CmdpState":
        a = np.asarray(arr, dtype=np.float64).ravel()
        if a.shape[0] != STATE_DIM:
            raise ValueError(f"state needs {STATE_DIM} values, got {a.shape[0]}")
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class RewardBreakdown:
    r_h: float
    r_c: float

    @property
    def total(self) -> float:
        return self.r_h + self.r_c


@dataclass(frozen=True)
class SafetyConfig:
    omega: float = 1.0
    violation_is_below: bool = True

    def __post_init__(self):
        if self.omega <= 0.0:
            raise ValueError("minimum-headway threshold must be positive")

    def to_dict(self) -> dict:
        return {"omega": self.omega, "violation_is_below": self.violation_is_below}


@dataclass(frozen=True)
class ComfortShape:
    """Sigmoid jerk penalty: zero at rest, half penalty at `half_jerk`,
    saturating at -1 for violent jerks."""

    half_jerk: float = 0.9
    steepness: float = 2.5

    def __post_init__(self):
        if self.half_jerk <= 0.0 or self.steepness <= 0.0:
            raise ValueError("comfort shape parameters must be positive")


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.08
    limits: ActionLimits = ActionLimits()
    safety: SafetyConfig = SafetyConfig()
    comfort: ComfortShape = ComfortShape()
    start_index: int = 2
    min_steps: int = MIN_EPISODE_STEPS

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.start_index < 2:
            raise ValueError("start index must be >= 2 (predictor history)")
        if self.min_steps <= self.start_index + 1:
            raise ValueError("min_steps leaves no room to step")


def reward_human(action: float, predicted: float) -> float:
    """1 at exact imitation, saturating toward -1 as the action deviates."""
    xi = abs(float(action) - float(predicted))
    return 2.0 * np.tanh(-2.0 * xi) + 1.0


def reward_comfort(jerk: float, shape: ComfortShape = ComfortShape()) -> float:
    """0 for smooth motion, -1/2 at the half-penalty jerk, toward -1 beyond."""
    ratio = abs(float(jerk)) / shape.half_jerk
    return -1.0 + 1.0 / (1.0 + ratio**shape.steepness)


def cost_indicator(headway_s: float, cfg: SafetyConfig = SafetyConfig()) -> int:
    """1 when the headway violates the threshold (strict; boundary is safe)."""
    h = float(headway_s)
    if h < 0.0:
        raise ValueError("headway must be non-negative")
    if cfg.violation_is_below:
        return 1 if h < cfg.omega else 0
    return 1 if h > cfg.omega else 0


def _state_headway(gap: float, speed: float) -> tuple[float, float]:
    """(raw, capped) time headway with a small speed floor; 0 on contact."""
    if gap <= 0.0:
        return 0.0, 0.0
    raw = gap / max(speed, HEADWAY_SPEED_FLOOR)
    return raw, min(raw, HEADWAY_CAP)


def _as_predictor(model_or_fn):
    if hasattr(model_or_fn, "predict"):
        # np.ravel tolerates scalar and length-1 array returns alike
        return lambda feats: float(np.ravel(model_or_fn.predict(feats))[0])
    return lambda feats: float(model_or_fn(feats))


class CarFollowEnv:
    """Single-trace episode stepper (mutable cursor; one thread at a time)."""

    def __init__(self, episode: EpisodeTrace, predictor, config: EnvConfig = EnvConfig()):
        if episode.n_steps < config.min_steps:
            raise TraceTooShort(
                f"episode has {episode.n_steps} steps, need >= {config.min_steps}"
            )
        self.episode = episode
        self.config = config
        self._predict = _as_predictor(predictor)
        self._limits = config.limits
        self._i = -1
        self._ego_pos = 0.0
        self._ego_speed = 0.0
        self._prev_action = 0.0
        self._done = True
        self._ready = False

    def set_rate_limit(self, enabled: bool) -> None:
        """Curriculum gate for the per-step action-change bound."""
        self._limits = dataclasses.replace(self._limits, delta_enabled=bool(enabled))

    @property
    def rate_limited(self) -> bool:
        return self._limits.delta_enabled

    def _predicted_accel(self, index: int, ego_speed: float, headway_capped: float) -> float:
        ep = self.episode
        feats = np.array(
            [
                ep.lead_accel[index - 2],
                ep.lead_accel[index - 1],
                ep.lead_accel[index],
                ep.lead_speed[index - 2],
                ep.lead_speed[index - 1],
                ep.lead_speed[index],
                ego_speed,
                headway_capped,
            ],
            dtype=np.float64,
        )
        raw = self._predict(feats)
        return float(min(self._limits.max_accel, max(self._limits.min_accel, raw)))

    def reset(self) -> CmdpState:
        ep = self.episode
        i0 = self.config.start_index
        self._i = i0
        self._ego_pos = float(ep.ego_pos[i0])
        self._ego_speed = float(ep.ego_speed[i0])
        self._prev_action = float(ep.ego_accel[i0 - 1])
        self._done = False
        self._ready = True
        gap = float(ep.lead_pos[i0]) - self._ego_pos
        raw_h, capped_h = _state_headway(gap, self._ego_speed)
        self.last_headway_raw = raw_h
        cost = cost_indicator(raw_h, self.config.safety)
        return CmdpState(
            lead_accel=float(ep.lead_accel[i0]),
            headway=capped_h,
            ego_speed=self._ego_speed,
            rel_velocity=float(ep.lead_speed[i0]) - self._ego_speed,
            prev_action=self._prev_action,
            cost_indicator=float(cost),
        )

    def step(self, action_raw: float):
        """Apply one acceleration command; returns
        (state, rewards, cost, done, info)."""
        if not self._ready or self._done:
            raise StepAfterDone("reset the environment before stepping")
        if not np.isfinite(action_raw):
            raise ValueError("action must be finite")
        ep = self.episode
        cfg = self.config

        applied = clamp_action(self._prev_action, float(action_raw), self._limits)
        jerk = (applied - self._prev_action) / cfg.dt

        pos_new, speed_new = _step_scalar(self._ego_pos, self._ego_speed, applied, cfg.dt)
        i_new = self._i + 1
        gap = float(ep.lead_pos[i_new]) - pos_new
        collision = gap <= 0.0
        raw_h, capped_h = _state_headway(gap, speed_new)
        cost = 1 if collision else cost_indicator(raw_h, cfg.safety)

        predicted = self._predicted_accel(i_new, speed_new, capped_h)
        rewards = RewardBreakdown(
            r_h=reward_human(applied, predicted),
            r_c=reward_comfort(jerk, cfg.comfort),
        )

        done = collision or i_new == ep.n_steps - 1
        state = CmdpState(
            lead_accel=float(ep.lead_accel[i_new]),
            headway=capped_h,
            ego_speed=speed_new,
            rel_velocity=float(ep.lead_speed[i_new]) - speed_new,
            prev_action=applied,
            cost_indicator=float(cost),
        )
        info = {
            "collision": collision,
            "predicted_accel": predicted,
            "headway_raw": raw_h,
            "gap": gap,
            "jerk": jerk,
            "t": i_new * cfg.dt,
            "index": i_new,
            "applied_action": applied,
        }

        self._i = i_new
        self._ego_pos = pos_new
        self._ego_speed = speed_new
        self._prev_action = applied
        self._done = done
        self.last_headway_raw = raw_h
        return state, rewards, cost, done, info


@dataclass
class EnvRollout:
    """One full episode under a fixed policy, with the per-step log rows."""

    rows: list
    total_reward: float
    total_r_h: float
    total_r_c: float
    n_steps: int
    n_violations: int
    min_headway: float
    collision: bool
    sq_dev_sum: float
    applied_actions: np.ndarray

    @property
    def violation_rate(self) -> float:
        return self.n_violations / self.n_steps if self.n_steps else 0.0

    @property
    def rmse_vs_predictor(self) -> float:
        return float(np.sqrt(self.sq_dev_sum / self.n_steps)) if self.n_steps else 0.0


def run_rollout(env: CarFollowEnv, policy) -> EnvRollout:
    """Drive one episode with policy(state_array) -> acceleration command."""
    state = env.reset()
    rows = []
    total_h = total_c = 0.0
    violations = 0
    min_headway = env.last_headway_raw
    collision = False
    sq_dev = 0.0
    actions = []
    done = False
    while not done:
        action = float(policy(state.as_array()))
        state, rewards, cost, done, info = env.step(action)
        applied = info["applied_action"]
        rows.append(
            [
                info["t"],
                state.lead_accel,
                applied,
                info["predicted_accel"],
                info["headway_raw"],
                state.ego_speed,
                state.rel_velocity,
                rewards.r_h,
                rewards.r_c,
                cost,
            ]
        )
        total_h += rewards.r_h
        total_c += rewards.r_c
        violations += cost
        min_headway = min(min_headway, info["headway_raw"])
        collision = collision or info["collision"]
        sq_dev += (applied - info["predicted_accel"]) ** 2
        actions.append(applied)
    return EnvRollout(
        rows=rows,
        total_reward=total_h + total_c,
        total_r_h=total_h,
        total_r_c=total_c,
        n_steps=len(rows),
        n_violations=violations,
        min_headway=min_headway,
        collision=collision,
        sq_dev_sum=sq_dev,
        applied_actions=np.array(actions, dtype=np.float64),
    )
