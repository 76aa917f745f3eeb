"""Intelligent-driver-model benchmarks and MAE calibration.

Two predictor baselines for judging the learned regressor: the IDM with fixed
per-style parameter defaults, and the same model with parameters fitted to a
dataset by minimizing mean absolute error (coarse grid search followed by a
Nelder-Mead refinement).  Also a generic open-loop rollout that drives a
simulated ego with any acceleration predictor against a recorded lead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy import optimize

from .errors import NonPositiveGap, TooFewSamples
from .kinematics import VehiclePoint, _step_scalar
from .styles import Style

if TYPE_CHECKING:
    from .trajectory import EpisodeTrace

# Physical command range for every predictor in this package, m/s^2.
ACCEL_RANGE = (-4.0, 4.0)

MIN_CALIBRATION_SAMPLES = 100


@dataclass(frozen=True)
class IdmParams:
    """Intelligent driver model parameters.

    v0: desired speed m/s; time_gap: desired time gap s; s0: standstill
    jam distance m; a_max: maximum acceleration m/s^2; b_comf: comfortable
    braking (positive) m/s^2; delta: free-road exponent.
    """

    v0: float = 33.0
    time_gap: float = 1.5
    s0: float = 2.0
    a_max: float = 1.5
    b_comf: float = 1.67
    delta: float = 4.0

    def __post_init__(self):
        if self.v0 < 1.0:
            raise ValueError("v0 must be >= 1 m/s")
        if self.time_gap < 0.1:
            raise ValueError("time_gap must be >= 0.1 s")
        if self.s0 <= 0.0 or self.a_max <= 0.0 or self.b_comf <= 0.0 or self.delta <= 0.0:
            raise ValueError("s0, a_max, b_comf, delta must all be > 0")

    def to_dict(self) -> dict[str, float]:
        return {
            "v0": self.v0,
            "time_gap": self.time_gap,
            "s0": self.s0,
            "a_max": self.a_max,
            "b_comf": self.b_comf,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IdmParams":
        return cls(**{k: float(v) for k, v in d.items()})


def style_defaults(style: Style) -> IdmParams:
    """Per-style parameter defaults; only the desired time gap differs."""
    gaps = {Style.AGGRESSIVE: 0.9, Style.NORMAL: 1.5, Style.CONSERVATIVE: 2.0}
    return IdmParams(time_gap=gaps[style])


def idm_accel(params: IdmParams, v: float, delta_v: float, gap: float) -> float:
    """IDM acceleration for ego speed v, closing speed delta_v = v_ego - v_lead,
    and bumper-to-bumper gap.

    The desired-gap dynamic term is floored at zero (canonical guarded form)
    so the response is monotone non-increasing in closing speed.  Output is
    clamped to the package-wide [-4, 4] command range.
    """
    if gap <= 0.0:
        raise NonPositiveGap(f"gap must be > 0, got {gap}")
    if v < 0.0:
        raise ValueError("speed must be >= 0")
    dyn = v * params.time_gap + v * delta_v / (2.0 * math.sqrt(params.a_max * params.b_comf))
    s_star = params.s0 + max(0.0, dyn)
    accel = params.a_max * (1.0 - (v / params.v0) ** params.delta - (s_star / gap) ** 2)
    return min(ACCEL_RANGE[1], max(ACCEL_RANGE[0], accel))


def _idm_accel_array(theta: np.ndarray, v: np.ndarray, dv: np.ndarray, gap: np.ndarray, delta: float) -> np.ndarray:
    """Vectorized IDM for calibration: theta = (v0, time_gap, s0, a_max, b_comf)."""
    v0, tg, s0, a_max, b_comf = theta
    dyn = v * tg + v * dv / (2.0 * math.sqrt(a_max * b_comf))
    s_star = s0 + np.maximum(0.0, dyn)
    accel = a_max * (1.0 - (v / v0) ** delta - (s_star / gap) ** 2)
    return np.clip(accel, ACCEL_RANGE[0], ACCEL_RANGE[1])


@dataclass(frozen=True)
class CalibrationBounds:
    """Search box for calibrate_idm_mae; delta stays fixed.

    The defaults cover plausible highway parameter ranges.
    """

    v0: tuple[float, float] = (20.0, 40.0)
    time_gap: tuple[float, float] = (0.5, 3.0)
    s0: tuple[float, float] = (1.0, 4.0)
    a_max: tuple[float, float] = (0.5, 3.0)
    b_comf: tuple[float, float] = (0.5, 3.0)

    def __post_init__(self):
        for lo, hi in self.as_tuple():
            if not (0.0 < lo < hi):
                raise ValueError("bounds must be a positive box with lo < hi")

    def as_tuple(self) -> tuple[tuple[float, float], ...]:
        return (self.v0, self.time_gap, self.s0, self.a_max, self.b_comf)


@dataclass
class CalibrationResult:
    params: IdmParams
    mae: float
    n_evals: int


def calibrate_idm_mae(
    states: np.ndarray,
    targets: np.ndarray,
    init: IdmParams,
    bounds: CalibrationBounds = CalibrationBounds(),
    *,
    grid_points: int = 5,
    simplex_iters: int = 200,
) -> CalibrationResult:
    """Fit IDM parameters to observed accelerations by minimizing MAE.

    Args:
        states: (n, 3) array of (ego speed, closing speed, gap) rows.
        targets: (n,) observed accelerations.
        init: starting parameters; evaluated alongside the coarse grid so a
            perfect init can never be lost.
        bounds: positive search box; the free-road exponent is taken from
            `init` and held fixed.
        grid_points: grid resolution per dimension for the coarse stage.
        simplex_iters: Nelder-Mead iteration budget for the refinement.

    Deterministic: no randomness anywhere in the search.
    """
    states = np.asarray(states, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] != 3:
        raise ValueError("states must be (n, 3): speed, closing speed, gap")
    n = states.shape[0]
    if n < MIN_CALIBRATION_SAMPLES or targets.shape[0] != n:
        raise TooFewSamples(min(n, targets.shape[0]), MIN_CALIBRATION_SAMPLES)
    if np.any(states[:, 2] <= 0.0):
        raise NonPositiveGap("calibration states contain non-positive gaps")

    v, dv, gap = states[:, 0], states[:, 1], states[:, 2]
    delta = init.delta
    evals = 0

    def objective(theta: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        clipped = np.clip(theta, [b[0] for b in bounds.as_tuple()], [b[1] for b in bounds.as_tuple()])
        return float(np.mean(np.abs(_idm_accel_array(clipped, v, dv, gap, delta) - targets)))

    box = bounds.as_tuple()
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in box]
    best_theta = np.array(
        [
            min(max(init.v0, box[0][0]), box[0][1]),
            min(max(init.time_gap, box[1][0]), box[1][1]),
            min(max(init.s0, box[2][0]), box[2][1]),
            min(max(init.a_max, box[3][0]), box[3][1]),
            min(max(init.b_comf, box[4][0]), box[4][1]),
        ]
    )
    best_mae = objective(best_theta)
    mesh = np.meshgrid(*axes, indexing="ij")
    candidates = np.stack([m.ravel() for m in mesh], axis=1)
    for theta in candidates:
        mae = objective(theta)
        if mae < best_mae:
            best_mae = mae
            best_theta = theta.copy()

    result = optimize.minimize(
        objective,
        best_theta,
        method="Nelder-Mead",
        bounds=box,
        options={"maxiter": simplex_iters, "xatol": 1e-9, "fatol": 1e-12},
    )
    if result.fun < best_mae:
        best_mae = float(result.fun)
        best_theta = np.clip(result.x, [b[0] for b in box], [b[1] for b in box])

    fitted = IdmParams(
        v0=float(best_theta[0]),
        time_gap=float(best_theta[1]),
        s0=float(best_theta[2]),
        a_max=float(best_theta[3]),
        b_comf=float(best_theta[4]),
        delta=delta,
    )
    return CalibrationResult(params=fitted, mae=best_mae, n_evals=evals)


@dataclass(frozen=True)
class PredictorInput:
    """Everything a one-step acceleration predictor may look at.

    Lead histories cover (t-2dt, t-dt, t), oldest first.
    """

    lead_accel_hist: tuple[float, float, float]
    lead_speed_hist: tuple[float, float, float]
    ego_speed: float
    gap: float
    headway: float
    rel_velocity: float


Predictor = Callable[[PredictorInput], float]


def idm_predictor(params: IdmParams) -> Predictor:
    """Wrap IDM as a rollout/benchmark predictor."""

    def predict(obs: PredictorInput) -> float:
        return idm_accel(params, obs.ego_speed, -obs.rel_velocity, obs.gap)

    return predict


@dataclass
class RolloutResult:
    """Closed-loop trace of a predictor following the recorded lead."""

    dt: float
    t_index: np.ndarray
    lead_pos: np.ndarray
    lead_speed: np.ndarray
    lead_accel: np.ndarray
    ego_pos: np.ndarray
    ego_speed: np.ndarray
    ego_accel: np.ndarray
    gap: np.ndarray
    headway: np.ndarray
    collision: bool
    collision_index: int | None

    @property
    def min_headway(self) -> float:
        return float(np.min(self.headway))


def rollout_predictor(
    episode: "EpisodeTrace",
    predictor: Predictor,
    *,
    start_index: int = 2,
    ego_init: VehiclePoint | None = None,
) -> RolloutResult:
    """Drive a simulated ego with `predictor` against the episode's lead.

    The lead is replayed verbatim from the trace; the ego integrates the
    predicted accelerations (clamped to [-4, 4]) with the shared motion
    model.  A non-positive gap marks a collision and ends the rollout; the
    collision is recorded as data, not raised.
    """
    n = episode.n_steps
    if start_index < 2 or start_index >= n - 1:
        raise ValueError("start_index must leave two steps of history and room to move")
    if ego_init is None:
        ego_pos = float(episode.ego_pos[start_index])
        ego_speed = float(episode.ego_speed[start_index])
    else:
        ego_pos = ego_init.pos
        ego_speed = ego_init.speed

    idx, lp, ls, la = [], [], [], []
    ep_, es_, ea_, gp_, hw_ = [], [], [], [], []
    collision = False
    collision_index = None
    for i in range(start_index, n):
        gap = float(episode.lead_pos[i]) - ego_pos
        if gap <= 0.0:
            collision = True
            collision_index = i
            break
        hw = gap / max(ego_speed, 0.1)
        obs = PredictorInput(
            lead_accel_hist=(
                float(episode.lead_accel[i - 2]),
                float(episode.lead_accel[i - 1]),
                float(episode.lead_accel[i]),
            ),
            lead_speed_hist=(
                float(episode.lead_speed[i - 2]),
                float(episode.lead_speed[i - 1]),
                float(episode.lead_speed[i]),
            ),
            ego_speed=ego_speed,
            gap=gap,
            headway=hw,
            rel_velocity=float(episode.lead_speed[i]) - ego_speed,
        )
        accel = min(ACCEL_RANGE[1], max(ACCEL_RANGE[0], float(predictor(obs))))
        idx.append(i)
        lp.append(float(episode.lead_pos[i]))
        ls.append(float(episode.lead_speed[i]))
        la.append(float(episode.lead_accel[i]))
        ep_.append(ego_pos)
        es_.append(ego_speed)
        ea_.append(accel)
        gp_.append(gap)
        hw_.append(hw)
        if i < n - 1:
            ego_pos, ego_speed = _step_scalar(ego_pos, ego_speed, accel, episode.dt)
    return RolloutResult(
        dt=episode.dt,
        t_index=np.array(idx, dtype=np.int64),
        lead_pos=np.array(lp),
        lead_speed=np.array(ls),
        lead_accel=np.array(la),
        ego_pos=np.array(ep_),
        ego_speed=np.array(es_),
        ego_accel=np.array(ea_),
        gap=np.array(gp_),
        headway=np.array(hw_),
        collision=collision,
        collision_index=collision_index,
    )


def wrong_style(style: Style) -> Style:
    """Cyclic style swap used for the deliberately-mismatched IDM benchmark."""
    order = {Style.AGGRESSIVE: Style.CONSERVATIVE, Style.NORMAL: Style.AGGRESSIVE, Style.CONSERVATIVE: Style.NORMAL}
    return order[style]


def equilibrium_gap(params: IdmParams, speed: float) -> float:
    """Steady-state gap at matched speeds; used to seed synthetic episodes."""
    free = 1.0 - (speed / params.v0) ** params.delta
    if free <= 1e-6:
        raise ValueError("no equilibrium at or above the desired speed")
    return (params.s0 + speed * params.time_gap) / math.sqrt(free)
