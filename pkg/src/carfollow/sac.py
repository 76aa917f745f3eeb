"""Soft actor-critic with a learned safety trade-off.

The longitudinal agent maximizes human-similarity + comfort reward while an
adaptive multiplier trades that reward against the expected frequency of
minimum-headway violations.  Twin reward critics, one cost critic, tanh-
squashed Gaussian policy on [-4, 4] m/s², entropy temperature adaptation,
uniform replay, and a curriculum that switches on a per-step action-rate
limit partway through training.  All nets are the hand-written numpy MLPs
from `nets`, so every gradient here is analytic and finite-difference
checkable.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field, replace

import numpy as np

from .cmdp_env import CarFollowEnv, EnvConfig, run_rollout
from .errors import BufferTooSmall, EmptyPool
from .nets import Adam, AdamScalar, Mlp, soft_update
from .regressor import Scaler
from .trajectory import EpisodeTrace

ACTION_SCALE = 4.0
STATE_DIM = 6
CHECKPOINT_FORMAT_VERSION = 1
_LOG_2PI = float(np.log(2.0 * np.pi))
_LOG_4 = float(np.log(4.0))
_LOG_2 = float(np.log(2.0))


@dataclass(frozen=True)
class AgentHyperparams:
    actor_hidden: tuple[int, ...] = (128, 256, 128)
    critic_hidden: tuple[int, ...] = (128, 128)
    learning_rate: float = 3e-4
    replay_capacity: int = 1_000_000
    batch_size: int = 128
    gamma: float = 0.99
    random_episodes: int = 100
    update_every: int = 5
    cost_budget: float = 0.1
    tau: float = 0.005
    lambda_lr: float = 0.2
    lambda_window: int = 10
    target_entropy: float = -1.0
    use_cost: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay capacity must be at least one batch")
        if self.update_every < 1 or self.batch_size < 1:
            raise ValueError("update cadence and batch size must be positive")

    def to_dict(self) -> dict:
        return {
            "actor_hidden": list(self.actor_hidden),
            "critic_hidden": list(self.critic_hidden),
            "learning_rate": self.learning_rate,
            "replay_capacity": self.replay_capacity,
            "batch_size": self.batch_size,
            "gamma": self.gamma,
            "random_episodes": self.random_episodes,
            "update_every": self.update_every,
            "cost_budget": self.cost_budget,
            "tau": self.tau,
            "lambda_lr": self.lambda_lr,
            "lambda_window": self.lambda_window,
            "target_entropy": self.target_entropy,
            "use_cost": self.use_cost,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentHyperparams":
        return cls(
            actor_hidden=tuple(int(x) for x in d["actor_hidden"]),
            critic_hidden=tuple(int(x) for x in d["critic_hidden"]),
            learning_rate=float(d["learning_rate"]),
            replay_capacity=int(d["replay_capacity"]),
            batch_size=int(d["batch_size"]),
            gamma=float(d["gamma"]),
            random_episodes=int(d["random_episodes"]),
            update_every=int(d["update_every"]),
            cost_budget=float(d["cost_budget"]),
            tau=float(d["tau"]),
            lambda_lr=float(d["lambda_lr"]),
            lambda_window=int(d["lambda_window"]),
            target_entropy=float(d["target_entropy"]),
            use_cost=bool(d["use_cost"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class CurriculumSchedule:
    """Action-rate limit stays off through `switch_episode`, on afterwards."""

    switch_episode: int = 500

    def rate_limited(self, episode: int) -> bool:
        return episode > self.switch_episode


@dataclass(frozen=True)
class LagrangeVariable:
    """Trade-off weight kept in (0,1) through a logistic map of a free real."""

    kappa: float = 0.0

    @property
    def value(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.kappa)))

    def updated(self, episode_cost_estimate: float, budget: float, lr: float) -> "LagrangeVariable":
        return LagrangeVariable(self.kappa + lr * (float(episode_cost_estimate) - float(budget)))


def update_lambda(
    lv: LagrangeVariable, episode_cost_estimate: float, budget: float, lr: float = 0.2
) -> LagrangeVariable:
    """Raise the safety weight when estimated cost exceeds the budget,
    lower it when under budget; fixed point exactly at the budget."""
    return lv.updated(episode_cost_estimate, budget, lr)


class ReplayBuffer:
    """Preallocated FIFO transition store with seeded uniform sampling."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM):
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros(self.capacity)
        self.rewards = np.zeros(self.capacity)
        self.costs = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_dim))
        self.dones = np.zeros(self.capacity)
        self.size = 0
        self._pos = 0

    def push(self, state, action, reward, cost, next_state, done) -> None:
        i = self._pos
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.costs[i] = cost
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size < batch_size:
            raise BufferTooSmall(self.size, batch_size)
        idx = _draw_without_replacement(rng, self.size, batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.costs[idx],
            self.next_states[idx],
            self.dones[idx],
        )


def _draw_without_replacement(rng: np.random.Generator, size: int, k: int) -> np.ndarray:
    """Uniform distinct indices; vectorized redraw of collided slots."""
    out = np.empty(k, dtype=np.int64)
    chosen: set[int] = set()
    filled = 0
    while filled < k:
        block = rng.integers(0, size, size=k - filled)
        for cand in block.tolist():
            if cand not in chosen:
                chosen.add(cand)
                out[filled] = cand
                filled += 1
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


class SacAgent:
    """Actor, twin reward critics, cost critic, and their update rules."""

    def __init__(self, hp: AgentHyperparams, obs_scaler: Scaler, rng: np.random.Generator):
        self.hp = hp
        self.obs_scaler = obs_scaler
        self.actor = Mlp.init((STATE_DIM, *hp.actor_hidden, 2), rng)
        csizes = (STATE_DIM + 1, *hp.critic_hidden, 1)
        self.q1 = Mlp.init(csizes, rng)
        self.q2 = Mlp.init(csizes, rng)
        self.qc = Mlp.init(csizes, rng)
        self.target_q1 = self.q1.copy()
        self.target_q2 = self.q2.copy()
        self.target_qc = self.qc.copy()
        self.opt_actor = Adam(self.actor, hp.learning_rate)
        self.opt_q1 = Adam(self.q1, hp.learning_rate)
        self.opt_q2 = Adam(self.q2, hp.learning_rate)
        self.opt_qc = Adam(self.qc, hp.learning_rate)
        self.log_alpha = AdamScalar(0.0, hp.learning_rate)
        self.lagrange = LagrangeVariable(0.0)
        self.total_updates = 0

    # ---- policy -----------------------------------------------------------

    def _policy_stats(self, states_scaled: np.ndarray, eps: np.ndarray) -> dict:
        """Forward the actor and evaluate the squashed-Gaussian sample
        a = 4·tanh(mu + sigma·eps) together with log pi(a|s)."""
        out, cache = self.actor.forward(states_scaled)
        mu = out[:, 0]
        rho = out[:, 1]
        sig_rho = _sigmoid(rho)
        log_sigma = -8.0 + 10.0 * sig_rho
        sigma = np.exp(log_sigma)
        u = mu + sigma * eps
        t = np.tanh(u)
        action = ACTION_SCALE * t
        log_pi = (
            -0.5 * eps**2
            - log_sigma
            - 0.5 * _LOG_2PI
            - _LOG_4
            + 2.0 * (u + _softplus(-2.0 * u) - _LOG_2)
        )
        return {
            "cache": cache,
            "mu": mu,
            "log_sigma": log_sigma,
            "slope": 10.0 * sig_rho * (1.0 - sig_rho),
            "sigma": sigma,
            "eps": eps,
            "u": u,
            "tanh_u": t,
            "action": action,
            "log_pi": log_pi,
        }

    def _scale(self, state_raw: np.ndarray) -> np.ndarray:
        return self.obs_scaler.apply(np.asarray(state_raw, dtype=np.float64))

    def act_stochastic(self, state_raw: np.ndarray, rng: np.random.Generator) -> float:
        s = np.atleast_2d(self._scale(state_raw))
        eps = rng.standard_normal(1)
        return float(self._policy_stats(s, eps)["action"][0])

    def act_deterministic(self, state_raw: np.ndarray) -> float:
        s = np.atleast_2d(self._scale(state_raw))
        out, _ = self.actor.forward(s)
        return float(ACTION_SCALE * np.tanh(out[0, 0]))

    # ---- critic helpers ---------------------------------------------------

    @staticmethod
    def _critic_input(states_scaled: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [states_scaled, (np.asarray(actions) / ACTION_SCALE)[:, None]], axis=1
        )

    def _critic_value(self, net: Mlp, states_scaled, actions):
        out, cache = net.forward(self._critic_input(states_scaled, actions))
        return out[:, 0], cache

    # ---- updates ----------------------------------------------------------

    def update_critics(self, batch, rng: np.random.Generator) -> dict:
        """One squared-error regression step for q1, q2, qc toward their
        soft targets, followed by Polyak target updates."""
        states, actions, rewards, costs, next_states, dones = batch
        n = states.shape[0]
        alpha = float(np.exp(self.log_alpha.value))
        gamma = self.hp.gamma

        eps = rng.standard_normal(n)
        nxt = self._policy_stats(next_states, eps)
        a_next = nxt["action"]
        log_pi_next = nxt["log_pi"]
        qt1, _ = self._critic_value(self.target_q1, next_states, a_next)
        qt2, _ = self._critic_value(self.target_q2, next_states, a_next)
        qct, _ = self._critic_value(self.target_qc, next_states, a_next)
        not_done = 1.0 - dones
        y = rewards + gamma * not_done * (np.minimum(qt1, qt2) - alpha * log_pi_next)
        yc = costs + gamma * not_done * qct

        losses = {}
        for name, net, opt, target in (
            ("q1", self.q1, self.opt_q1, y),
            ("q2", self.q2, self.opt_q2, y),
            ("qc", self.qc, self.opt_qc, yc),
        ):
            if name == "qc" and not self.hp.use_cost:
                losses[name] = 0.0
                continue
            q, cache = self._critic_value(net, states, actions)
            resid = q - target
            losses[name] = float(np.mean(resid**2))
            d_out = (2.0 * resid / n)[:, None]
            gw, gb = net.backward(cache, d_out)[:2]
            opt.step(gw, gb)

        soft_update(self.target_q1, self.q1, self.hp.tau)
        soft_update(self.target_q2, self.q2, self.hp.tau)
        if self.hp.use_cost:
            soft_update(self.target_qc, self.qc, self.hp.tau)
        return losses

    def actor_loss(
        self, states_scaled: np.ndarray, eps: np.ndarray, lam: float, alpha: float
    ) -> float:
        """Scalar actor objective for a fixed noise draw (used for both the
        update and its finite-difference check)."""
        pol = self._policy_stats(states_scaled, eps)
        a = pol["action"]
        q1, _ = self._critic_value(self.q1, states_scaled, a)
        q2, _ = self._critic_value(self.q2, states_scaled, a)
        q_min = np.minimum(q1, q2)
        qc, _ = self._critic_value(self.qc, states_scaled, a)
        return float(np.mean((1.0 - lam) * (alpha * pol["log_pi"] - q_min) + lam * qc))

    def actor_loss_grads(
        self, states_scaled: np.ndarray, eps: np.ndarray, lam: float, alpha: float
    ):
        """(loss, dW, db) of the actor objective w.r.t. actor parameters.

        Chain rule through the squash: with u = mu + sigma*eps and
        t = tanh(u),
          d log_pi / d mu        = 2 t
          d log_pi / d log_sigma = -1 + 2 t sigma eps
          d action / d mu        = 4 (1 - t²)
          d action / d log_sigma = 4 (1 - t²) sigma eps
        and critic sensitivity d q / d action comes from the critic's input
        gradient (last input column, scaled by 1/4).
        """
        n = states_scaled.shape[0]
        pol = self._policy_stats(states_scaled, eps)
        a = pol["action"]
        q1, c1 = self._critic_value(self.q1, states_scaled, a)
        q2, c2 = self._critic_value(self.q2, states_scaled, a)
        qc, cc = self._critic_value(self.qc, states_scaled, a)
        q_min = np.minimum(q1, q2)
        loss = float(np.mean((1.0 - lam) * (alpha * pol["log_pi"] - q_min) + lam * qc))

        m1 = (q1 <= q2).astype(np.float64)
        d_q1 = (-(1.0 - lam) / n) * m1
        d_q2 = (-(1.0 - lam) / n) * (1.0 - m1)
        d_qc = np.full(n, lam / n)
        d_action = (
            self.q1.backward(c1, d_q1[:, None])[2][:, STATE_DIM]
            + self.q2.backward(c2, d_q2[:, None])[2][:, STATE_DIM]
            + self.qc.backward(cc, d_qc[:, None])[2][:, STATE_DIM]
        ) / ACTION_SCALE

        w_lp = (1.0 - lam) * alpha / n
        t = pol["tanh_u"]
        one_m_t2 = 1.0 - t**2
        se = pol["sigma"] * pol["eps"]
        d_mu = d_action * ACTION_SCALE * one_m_t2 + w_lp * 2.0 * t
        d_log_sigma = d_action * ACTION_SCALE * one_m_t2 * se + w_lp * (-1.0 + 2.0 * t * se)
        d_out_actor = np.stack([d_mu, d_log_sigma * pol["slope"]], axis=1)
        gw, gb = self.actor.backward(pol["cache"], d_out_actor)[:2]
        return loss, gw, gb

    def update_actor_and_temperature(self, batch, rng: np.random.Generator) -> dict:
        states = batch[0]
        n = states.shape[0]
        lam = self.lagrange.value if self.hp.use_cost else 0.0
        alpha = float(np.exp(self.log_alpha.value))
        eps = rng.standard_normal(n)

        loss, gw, gb = self.actor_loss_grads(states, eps, lam, alpha)
        self.opt_actor.step(gw, gb)

        log_pi = self._policy_stats(states, eps)["log_pi"]
        grad_log_alpha = -alpha * float(np.mean(log_pi + self.hp.target_entropy))
        self.log_alpha.step(grad_log_alpha)
        self.total_updates += 1
        return {
            "actor": loss,
            "alpha": float(np.exp(self.log_alpha.value)),
            "lambda": lam,
        }

    # ---- persistence ------------------------------------------------------

    def checkpoint(self, *, episode: int, total_steps: int, curriculum_phase: int, eval_metrics=None) -> dict:
        d = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "kind": "sac_lagrangian_agent",
            "seed": self.hp.seed,
            "episode": int(episode),
            "total_steps": int(total_steps),
            "total_updates": int(self.total_updates),
            "curriculum_phase": int(curriculum_phase),
            "log_alpha": float(self.log_alpha.value),
            "kappa": float(self.lagrange.kappa),
            "hyperparams": self.hp.to_dict(),
            "obs_scaler": self.obs_scaler.to_dict(),
            "actor": self.actor.to_dict(),
            "q1": self.q1.to_dict(),
            "q2": self.q2.to_dict(),
            "qc": self.qc.to_dict(),
            "target_q1": self.target_q1.to_dict(),
            "target_q2": self.target_q2.to_dict(),
            "target_qc": self.target_qc.to_dict(),
        }
        if eval_metrics is not None:
            d["eval"] = eval_metrics.to_dict()
        return d

    @classmethod
    def from_checkpoint(cls, d: dict) -> "SacAgent":
        if int(d.get("format_version", -1)) != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format_version {d.get('format_version')!r}")
        hp = AgentHyperparams.from_dict(d["hyperparams"])
        agent = cls.__new__(cls)
        agent.hp = hp
        agent.obs_scaler = Scaler.from_dict(d["obs_scaler"])
        agent.actor = Mlp.from_dict(d["actor"])
        agent.q1 = Mlp.from_dict(d["q1"])
        agent.q2 = Mlp.from_dict(d["q2"])
        agent.qc = Mlp.from_dict(d["qc"])
        agent.target_q1 = Mlp.from_dict(d["target_q1"])
        agent.target_q2 = Mlp.from_dict(d["target_q2"])
        agent.target_qc = Mlp.from_dict(d["target_qc"])
        agent.opt_actor = Adam(agent.actor, hp.learning_rate)
        agent.opt_q1 = Adam(agent.q1, hp.learning_rate)
        agent.opt_q2 = Adam(agent.q2, hp.learning_rate)
        agent.opt_qc = Adam(agent.qc, hp.learning_rate)
        agent.log_alpha = AdamScalar(float(d["log_alpha"]), hp.learning_rate)
        agent.lagrange = LagrangeVariable(float(d["kappa"]))
        agent.total_updates = int(d["total_updates"])
        return agent


@dataclass(frozen=True)
class EvalMetrics:
    mean_reward: float
    mean_discounted_cost: float
    violation_rate: float
    min_headway: float
    rmse_vs_predictor: float
    n_traces: int

    def to_dict(self) -> dict:
        return {
            "mean_reward": self.mean_reward,
            "mean_discounted_cost": self.mean_discounted_cost,
            "violation_rate": self.violation_rate,
            "min_headway": self.min_headway,
            "rmse_vs_predictor": self.rmse_vs_predictor,
            "n_traces": self.n_traces,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalMetrics":
        return cls(
            mean_reward=float(d["mean_reward"]),
            mean_discounted_cost=float(d["mean_discounted_cost"]),
            violation_rate=float(d["violation_rate"]),
            min_headway=float(d["min_headway"]),
            rmse_vs_predictor=float(d["rmse_vs_predictor"]),
            n_traces=int(d["n_traces"]),
        )


def fit_observation_scaler(
    pool: list[EpisodeTrace], predictor, env_config: EnvConfig
) -> Scaler:
    """Affine state normalizer from replaying each pool trace with its own
    recorded ego accelerations (rate limit off, so replay is exact)."""
    if not pool:
        raise EmptyPool("no traces to fit the observation scaler on")
    rows = []
    for ep in pool:
        env = CarFollowEnv(ep, predictor, env_config)
        env.set_rate_limit(False)
        state = env.reset()
        rows.append(state.as_array())
        done = False
        i = env_config.start_index
        while not done:
            state, _, _, done, _ = env.step(float(ep.ego_accel[i]))
            rows.append(state.as_array())
            i += 1
    return Scaler.fit(np.stack(rows))


def evaluate(
    agent: SacAgent,
    traces: list[EpisodeTrace],
    predictor,
    env_config: EnvConfig,
    *,
    rate_limited: bool,
    gamma: float | None = None,
) -> tuple[EvalMetrics, list]:
    """Deterministic-policy metrics averaged over traces (min headway is the
    worst across traces); also returns each trace's rollout log rows."""
    if not traces:
        raise EmptyPool("no evaluation traces")
    g = agent.hp.gamma if gamma is None else gamma
    rewards, disc_costs, viol, mins, rmses = [], [], [], [], []
    all_rows = []
    for ep in traces:
        env = CarFollowEnv(ep, predictor, env_config)
        env.set_rate_limit(rate_limited)
        roll = run_rollout(env, agent.act_deterministic)
        rewards.append(roll.total_reward)
        costs = np.array([row[9] for row in roll.rows], dtype=np.float64)
        disc_costs.append(float(np.sum(costs * g ** np.arange(costs.size))))
        viol.append(roll.violation_rate)
        mins.append(roll.min_headway)
        rmses.append(roll.rmse_vs_predictor)
        all_rows.append(roll.rows)
    metrics = EvalMetrics(
        mean_reward=float(np.mean(rewards)),
        mean_discounted_cost=float(np.mean(disc_costs)),
        violation_rate=float(np.mean(viol)),
        min_headway=float(np.min(mins)),
        rmse_vs_predictor=float(np.mean(rmses)),
        n_traces=len(traces),
    )
    return metrics, all_rows


EPISODE_LOG_COLUMNS = (
    "episode",
    "steps",
    "return",
    "mean_cost",
    "lambda",
    "temperature",
    "curriculum_phase",
)
EVAL_LOG_COLUMNS = (
    "episode",
    "mean_reward",
    "mean_discounted_cost",
    "violation_rate",
    "min_headway",
    "rmse_vs_predictor",
)


@dataclass
class TrainResult:
    agent: SacAgent
    best_checkpoint: dict
    best_eval: EvalMetrics
    episode_rows: list = field(default_factory=list)
    eval_rows: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)


def train(
    pool: list[EpisodeTrace],
    predictor,
    hp: AgentHyperparams,
    schedule: CurriculumSchedule,
    *,
    n_episodes: int,
    eval_traces: list[EpisodeTrace],
    env_config: EnvConfig = EnvConfig(),
    eval_every: int = 100,
) -> TrainResult:
    """Full training loop: random warmup, per-5-transition updates, per-
    episode multiplier updates, periodic deterministic evaluation, and
    best-safe-checkpoint selection."""
    if not pool:
        raise EmptyPool("training pool is empty")
    root = np.random.SeedSequence([int(hp.seed), 23])
    ss_nets, ss_draw, ss_act, ss_upd = root.spawn(4)
    obs_scaler = fit_observation_scaler(pool, predictor, env_config)
    agent = SacAgent(hp, obs_scaler, np.random.default_rng(ss_nets))
    draw_rng = np.random.default_rng(ss_draw)
    act_rng = np.random.default_rng(ss_act)
    upd_rng = np.random.default_rng(ss_upd)

    buf = ReplayBuffer(hp.replay_capacity)
    recent_costs: collections.deque = collections.deque(maxlen=hp.lambda_window)
    result = TrainResult(agent=agent, best_checkpoint={}, best_eval=None)  # type: ignore[arg-type]
    total_steps = 0
    since_update = 0

    for episode in range(1, n_episodes + 1):
        rate_on = schedule.rate_limited(episode)
        ep_trace = pool[int(draw_rng.integers(len(pool)))]
        env = CarFollowEnv(ep_trace, predictor, env_config)
        env.set_rate_limit(rate_on)
        state = env.reset()
        s = agent.obs_scaler.apply(state.as_array())
        ep_return = 0.0
        ep_cost = 0
        steps = 0
        done = False
        while not done:
            if episode <= hp.random_episodes:
                action = float(act_rng.uniform(-ACTION_SCALE, ACTION_SCALE))
            else:
                action = agent.act_stochastic(state.as_array(), act_rng)
            next_state, rewards, cost, done, info = env.step(action)
            s_next = agent.obs_scaler.apply(next_state.as_array())
            buf.push(s, info["applied_action"], rewards.total, cost, s_next, done)
            state, s = next_state, s_next
            ep_return += rewards.total
            ep_cost += cost
            steps += 1
            total_steps += 1
            since_update += 1
            if since_update >= hp.update_every and buf.size >= hp.batch_size:
                since_update = 0
                batch = buf.sample(hp.batch_size, upd_rng)
                agent.update_critics(batch, upd_rng)
                agent.update_actor_and_temperature(batch, upd_rng)

        recent_costs.append(ep_cost / steps if steps else 0.0)
        if hp.use_cost:
            estimate = float(np.mean(recent_costs))
            agent.lagrange = update_lambda(agent.lagrange, estimate, hp.cost_budget, hp.lambda_lr)
        result.episode_rows.append(
            [
                episode,
                steps,
                ep_return,
                ep_cost / steps if steps else 0.0,
                agent.lagrange.value if hp.use_cost else 0.0,
                float(np.exp(agent.log_alpha.value)),
                int(rate_on),
            ]
        )

        if episode % eval_every == 0:
            metrics, _ = evaluate(
                agent, eval_traces, predictor, env_config, rate_limited=rate_on
            )
            ck = agent.checkpoint(
                episode=episode,
                total_steps=total_steps,
                curriculum_phase=int(rate_on),
                eval_metrics=metrics,
            )
            result.checkpoints.append(ck)
            result.eval_rows.append(
                [
                    episode,
                    metrics.mean_reward,
                    metrics.mean_discounted_cost,
                    metrics.violation_rate,
                    metrics.min_headway,
                    metrics.rmse_vs_predictor,
                ]
            )

    result.best_checkpoint, result.best_eval = select_checkpoint(
        result.checkpoints, hp.cost_budget, use_cost=hp.use_cost
    )
    return result


def select_checkpoint(checkpoints: list, budget: float, *, use_cost: bool = True):
    """Best evaluation reward among constraint-satisfying checkpoints;
    falls back to the lowest-violation one.  Without the cost channel the
    pick is purely best reward."""
    if not checkpoints:
        raise EmptyPool("no checkpoints recorded")
    evals = [EvalMetrics.from_dict(ck["eval"]) for ck in checkpoints]
    if use_cost:
        safe = [i for i, m in enumerate(evals) if m.violation_rate <= budget]
        if safe:
            best = max(safe, key=lambda i: evals[i].mean_reward)
        else:
            best = min(range(len(evals)), key=lambda i: (evals[i].violation_rate, -evals[i].mean_reward))
    else:
        best = max(range(len(evals)), key=lambda i: evals[i].mean_reward)
    return checkpoints[best], evals[best]
