"""Command-line pipeline: ingest → classify → train/calibrate → agent → report.

Every command reads one layered key=value config (defaults, then --config
file, then flags), derives a short hash of the behavior-relevant keys, and
stamps that hash plus the seed into every artifact it writes, so identical
(config, seed) reruns produce byte-identical outputs.

Exit codes: 0 success, 2 usage error, 3 data error, 4 missing upstream
artifact.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import configio
from .baselines import CalibrationBounds, IdmParams, calibrate_idm_mae, style_defaults, wrong_style
from .classifier import RuleConfig, classify_driver, style_statistics, tag_episode
from .cmdp_env import ROLLOUT_COLUMNS, CarFollowEnv, EnvConfig, SafetyConfig, run_rollout
from .errors import (
    CarFollowError,
    EmptyStore,
    MissingUpstream,
    NoInput,
    NothingToReport,
    TooFewSamples,
)
from .regressor import (
    FEATURE_NAMES,
    MlpModel,
    TrainConfig,
    dataset_from_episodes,
    mae,
    train_regressor,
)
from .reporting import build_mae_table, build_rmse_table, idm_mae_on_features, idm_states_from_features
from .sac import (
    EPISODE_LOG_COLUMNS,
    EVAL_LOG_COLUMNS,
    AgentHyperparams,
    CurriculumSchedule,
    SacAgent,
    evaluate as evaluate_agent,
    train as train_agent_loop,
)
from .styles import STYLE_CODE, STYLE_ORDER, Style
from .trajectory import (
    WORKING_DT,
    FilterConfig,
    VehicleClass,
    extract_follow_episodes,
    generate_synthetic_episode,
    parse_trace_file,
    read_episode_csv,
    resample_episode,
    write_episode_csv,
)


class UsageError(Exception):
    """Bad flags or config keys; maps to exit code 2."""


DEFAULTS: dict[str, str] = {
    # paths (excluded from the config hash; relocating outputs must not
    # change their bytes)
    "data_dir": "data",
    "output_dir": "out",
    "model_dir": "",
    # run identity
    "seed": "0",
    "style": "all",
    # synthetic corpus
    "synthetic.n": "0",
    "synthetic.duration": "20.0",
    # recorded-data ingest
    "ingest.raw_dt": "0.04",
    "filter.min_duration": "10.0",
    "filter.min_speed": "6.0",
    "filter.require_constant_lead": "true",
    "filter.require_no_lane_change": "true",
    "filter.allow_trucks": "false",
    # style rules
    "rule.horizon": "5.0",
    "rule.boundary_low": "1.25",
    "rule.boundary_high": "1.65",
    "rule.double_band": "0.1",
    "rule.dead_band_v": "0.05",
    "rule.dead_band_a": "0.05",
    # regressor training
    "train.max_epochs": "200",
    "train.learning_rate": "0.0001",
    "train.batch_size": "0",
    "train.hidden": "",
    # fixed IDM baseline (time gap always comes from the style)
    "idm.v0": "33.0",
    "idm.s0": "2.0",
    "idm.a_max": "1.5",
    "idm.b_comf": "1.67",
    "idm.delta": "4.0",
    # IDM calibration
    "calib.grid_points": "5",
    "calib.simplex_iters": "200",
    "calib.v0_min": "20.0",
    "calib.v0_max": "40.0",
    "calib.time_gap_min": "0.5",
    "calib.time_gap_max": "3.0",
    "calib.s0_min": "1.0",
    "calib.s0_max": "4.0",
    "calib.a_max_min": "0.5",
    "calib.a_max_max": "3.0",
    "calib.b_comf_min": "0.5",
    "calib.b_comf_max": "3.0",
    # environment
    "env.omega": "1.0",
    "env.violation_is_below": "true",
    # agent
    "agent.n_episodes": "2000",
    "agent.eval_every": "100",
    "agent.n_eval_traces": "2",
    "agent.actor_hidden": "128,256,128",
    "agent.critic_hidden": "128,128",
    "agent.learning_rate": "0.0003",
    "agent.replay_capacity": "1000000",
    "agent.batch_size": "128",
    "agent.random_episodes": "100",
    "agent.update_every": "5",
    "agent.cost_budget": "0.1",
    "agent.lambda_lr": "0.2",
    "agent.lambda_window": "10",
    "agent.tau": "0.005",
    "agent.gamma": "0.99",
    "agent.use_cost": "true",
    "agent.switch_episode": "500",
}

_PATH_KEYS = ("data_dir", "output_dir", "model_dir")
_STYLE_CHOICES = ("aggressive", "normal", "conservative", "all")


@dataclass
class RunConfig:
    values: dict[str, str]

    @classmethod
    def load(cls, args: argparse.Namespace) -> "RunConfig":
        values = dict(DEFAULTS)
        if args.config:
            path = Path(args.config)
            if not path.exists():
                raise UsageError(f"config file not found: {path}")
            overrides = configio.parse_kv_file(path)
            unknown = sorted(set(overrides) - set(DEFAULTS))
            if unknown:
                raise UsageError(f"unknown config keys: {', '.join(unknown)}")
            values.update(overrides)
        if args.seed is not None:
            values["seed"] = str(int(args.seed))
        if args.style is not None:
            values["style"] = args.style
        if getattr(args, "synthetic", None) is not None:
            values["synthetic.n"] = str(int(args.synthetic))
        if values["style"] not in _STYLE_CHOICES:
            raise UsageError(f"style must be one of {_STYLE_CHOICES}")
        env_out = os.environ.get("AA_OUTPUT_DIR")
        if env_out:
            values["output_dir"] = env_out
        return cls(values=values)

    # typed accessors ------------------------------------------------------

    def get(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError as e:
            raise UsageError(f"config key {key} must be an integer: {e}")

    def get_float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError as e:
            raise UsageError(f"config key {key} must be a number: {e}")

    def get_bool(self, key: str) -> bool:
        raw = self.values[key].strip().lower()
        if raw in ("true", "1", "yes"):
            return True
        if raw in ("false", "0", "no"):
            return False
        raise UsageError(f"config key {key} must be true or false, got {raw!r}")

    def get_ints(self, key: str) -> tuple[int, ...]:
        raw = self.values[key].strip()
        if not raw:
            return ()
        try:
            return tuple(int(part) for part in raw.split(","))
        except ValueError as e:
            raise UsageError(f"config key {key} must be comma-separated integers: {e}")

    # derived --------------------------------------------------------------

    @property
    def seed(self) -> int:
        return self.get_int("seed")

    @property
    def out(self) -> Path:
        return Path(self.get("output_dir"))

    @property
    def models(self) -> Path:
        raw = self.get("model_dir")
        return Path(raw) if raw else self.out / "models"

    @property
    def styles(self) -> list[Style]:
        sel = self.get("style")
        if sel == "all":
            return list(STYLE_ORDER)
        return [Style.from_string(sel)]

    @property
    def hash(self) -> str:
        hashed = {k: v for k, v in self.values.items() if k not in _PATH_KEYS}
        return configio.config_hash(hashed)

    @property
    def header(self) -> str:
        return configio.header_comment(self.hash, self.seed)

    def style_seed(self, style: Style) -> int:
        return self.seed * 4 + STYLE_CODE[style]

    def filter_config(self) -> FilterConfig:
        classes = {VehicleClass.CAR}
        if self.get_bool("filter.allow_trucks"):
            classes.add(VehicleClass.TRUCK)
        return FilterConfig(
            min_duration=self.get_float("filter.min_duration"),
            min_speed=self.get_float("filter.min_speed"),
            require_constant_lead=self.get_bool("filter.require_constant_lead"),
            require_no_lane_change=self.get_bool("filter.require_no_lane_change"),
            allowed_classes=frozenset(classes),
        )

    def rule_config(self) -> RuleConfig:
        return RuleConfig(
            horizon_s=self.get_float("rule.horizon"),
            boundary_low=self.get_float("rule.boundary_low"),
            boundary_high=self.get_float("rule.boundary_high"),
            double_band=self.get_float("rule.double_band"),
            dead_band_v=self.get_float("rule.dead_band_v"),
            dead_band_a=self.get_float("rule.dead_band_a"),
        )

    def base_idm(self, time_gap: float) -> IdmParams:
        return IdmParams(
            v0=self.get_float("idm.v0"),
            time_gap=time_gap,
            s0=self.get_float("idm.s0"),
            a_max=self.get_float("idm.a_max"),
            b_comf=self.get_float("idm.b_comf"),
            delta=self.get_float("idm.delta"),
        )

    def calibration_bounds(self) -> CalibrationBounds:
        return CalibrationBounds(
            v0=(self.get_float("calib.v0_min"), self.get_float("calib.v0_max")),
            time_gap=(self.get_float("calib.time_gap_min"), self.get_float("calib.time_gap_max")),
            s0=(self.get_float("calib.s0_min"), self.get_float("calib.s0_max")),
            a_max=(self.get_float("calib.a_max_min"), self.get_float("calib.a_max_max")),
            b_comf=(self.get_float("calib.b_comf_min"), self.get_float("calib.b_comf_max")),
        )

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            safety=SafetyConfig(
                omega=self.get_float("env.omega"),
                violation_is_below=self.get_bool("env.violation_is_below"),
            )
        )

    def agent_hyperparams(self, style: Style) -> AgentHyperparams:
        return AgentHyperparams(
            actor_hidden=self.get_ints("agent.actor_hidden"),
            critic_hidden=self.get_ints("agent.critic_hidden"),
            learning_rate=self.get_float("agent.learning_rate"),
            replay_capacity=self.get_int("agent.replay_capacity"),
            batch_size=self.get_int("agent.batch_size"),
            gamma=self.get_float("agent.gamma"),
            random_episodes=self.get_int("agent.random_episodes"),
            update_every=self.get_int("agent.update_every"),
            cost_budget=self.get_float("agent.cost_budget"),
            tau=self.get_float("agent.tau"),
            lambda_lr=self.get_float("agent.lambda_lr"),
            lambda_window=self.get_int("agent.lambda_window"),
            use_cost=self.get_bool("agent.use_cost"),
            seed=self.style_seed(style),
        )


# ---- shared store access --------------------------------------------------


def _episode_dir(cfg: RunConfig) -> Path:
    return cfg.out / "episodes"


def _load_store(cfg: RunConfig) -> list[tuple[str, object]]:
    epdir = _episode_dir(cfg)
    files = sorted(epdir.glob("ep_*.csv"))
    if not files:
        raise EmptyStore(f"no ingested episodes under {epdir}")
    return [(f.name, read_episode_csv(f)) for f in files]


def _load_dataset(cfg: RunConfig, style: Style) -> tuple[np.ndarray, np.ndarray]:
    path = cfg.out / "classify" / f"dataset_{style.value}.csv"
    if not path.exists():
        raise MissingUpstream("classify")
    _, rows, _ = configio.read_csv(path)
    arr = np.array(rows, dtype=np.float64)
    return arr[:, :-1], arr[:, -1]


def _load_regressor(cfg: RunConfig, style: Style) -> MlpModel:
    path = cfg.models / f"regressor_{style.value}.json"
    if not path.exists():
        raise MissingUpstream("train-regressor")
    return MlpModel.from_dict(configio.load_json(path))


def _labeled_episodes(cfg: RunConfig, style: Style) -> list:
    labels_path = cfg.out / "classify" / "labels.json"
    if not labels_path.exists():
        raise MissingUpstream("classify")
    labels = configio.load_json(labels_path)["labels"]
    epdir = _episode_dir(cfg)
    out = []
    for name in sorted(labels):
        if labels[name]["label"] == style.value:
            out.append(read_episode_csv(epdir / name))
    return out


def _split_pool(cfg: RunConfig, style: Style):
    episodes = _labeled_episodes(cfg, style)
    n_eval = cfg.get_int("agent.n_eval_traces")
    if len(episodes) < n_eval + 1:
        raise TooFewSamples(len(episodes), n_eval + 1)
    return episodes[:-n_eval], episodes[-n_eval:]


# ---- commands --------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    epdir = _episode_dir(cfg)
    epdir.mkdir(parents=True, exist_ok=True)
    n_syn = cfg.get_int("synthetic.n")
    manifest: dict = {"episodes": [], "files": []}

    if n_syn > 0:
        duration = cfg.get_float("synthetic.duration")
        for style in cfg.styles:
            for i in range(n_syn):
                seed = cfg.seed * 100_000 + i
                ep = generate_synthetic_episode(style, seed=seed, duration=duration)
                name = f"ep_{style.value}_{i:05d}.csv"
                write_episode_csv(ep, epdir / name, comment_lines=[cfg.header])
                manifest["episodes"].append(
                    {"file": name, "style": style.value, "seed": seed, "n_steps": ep.n_steps}
                )
    else:
        data_dir = Path(cfg.get("data_dir"))
        files = sorted(data_dir.glob("*.csv")) if data_dir.is_dir() else []
        if not files:
            raise NoInput(f"no trajectory files under {data_dir} and no --synthetic N")
        fcfg = cfg.filter_config()
        raw_dt = cfg.get_float("ingest.raw_dt")
        for f in files:
            try:
                frames = parse_trace_file(f.read_text())
                stats: dict = {}
                episodes = extract_follow_episodes(frames, fcfg, dt=raw_dt, stats=stats)
            except CarFollowError as e:
                manifest["files"].append({"file": f.name, "error": f"{type(e).__name__}: {e}"})
                continue
            kept = 0
            for ep in episodes:
                ep = resample_episode(ep, WORKING_DT)
                name = f"ep_{f.stem}_{kept:03d}.csv"
                write_episode_csv(ep, epdir / name, comment_lines=[cfg.header])
                manifest["episodes"].append(
                    {"file": name, "recording": f.name, "driver_id": ep.driver_id, "n_steps": ep.n_steps}
                )
                kept += 1
            manifest["files"].append({"file": f.name, **stats})

    manifest["n_episodes"] = len(manifest["episodes"])
    configio.dump_json(epdir / "manifest.json", manifest, cfg.hash, cfg.seed)
    print(f"ingest: wrote {manifest['n_episodes']} episodes to {epdir}")
    return 0


def cmd_classify(cfg: RunConfig) -> int:
    store = _load_store(cfg)
    rules = cfg.rule_config()
    cdir = cfg.out / "classify"
    cdir.mkdir(parents=True, exist_ok=True)

    labels: dict = {}
    groups: dict[Style, list] = {}
    all_eps, all_tags = [], []
    for name, ep in store:
        profile = classify_driver(ep, rules)
        tags = tag_episode(ep, rules)
        labels[name] = {
            "label": profile.label.value,
            "ratios": {s.value: profile.ratios[s] for s in STYLE_ORDER},
            "n_steps": profile.n_steps,
            "declared_style": ep.style.value if ep.style is not None else None,
        }
        groups.setdefault(profile.label, []).append(ep)
        all_eps.append(ep)
        all_tags.append(tags)
    configio.dump_json(cdir / "labels.json", {"labels": labels}, cfg.hash, cfg.seed)

    for style, eps in sorted(groups.items(), key=lambda kv: kv[0].value):
        feats, targs = dataset_from_episodes(eps)
        rows = [list(f) + [t] for f, t in zip(feats, targs)]
        configio.write_csv(
            cdir / f"dataset_{style.value}.csv",
            (*FEATURE_NAMES, "target_accel"),
            rows,
            comment_lines=[cfg.header],
        )

    summary: dict = {"labels": {s.value: sum(1 for _ in groups.get(s, [])) for s in STYLE_ORDER}}
    stats = style_statistics(all_eps, all_tags)
    for style, summ in stats.items():
        for kind, hist in (("accel", summ.accel_hist), ("headway", summ.headway_hist)):
            centers = (hist.bin_left_edges + 0.5 * hist.bin_width).tolist()
            configio.write_csv(
                cdir / f"hist_{kind}_{style.value}.csv",
                ("bin_center", "count"),
                list(zip(centers, hist.counts.tolist())),
                comment_lines=[cfg.header],
            )
        summary[style.value] = {
            "n_steps": summ.count,
            "braking_fraction": summ.braking_fraction,
            "accelerating_fraction": summ.accelerating_fraction,
            "headway_mode": summ.headway_hist.mode,
            "accel_mode": summ.accel_hist.mode,
        }
    configio.dump_json(cdir / "summary.json", summary, cfg.hash, cfg.seed)
    print(f"classify: labeled {len(store)} episodes into {sorted(g.value for g in groups)}")
    return 0


def cmd_train_regressor(cfg: RunConfig) -> int:
    cfg.models.mkdir(parents=True, exist_ok=True)
    for style in cfg.styles:
        feats, targs = _load_dataset(cfg, style)
        overrides: dict = {"max_epochs": cfg.get_int("train.max_epochs")}
        lr = cfg.get_float("train.learning_rate")
        overrides["learning_rate"] = lr
        batch = cfg.get_int("train.batch_size")
        if batch > 0:
            overrides["batch_size"] = batch
        hidden = cfg.get_ints("train.hidden")
        if hidden:
            overrides["hidden_sizes"] = hidden
        tc = TrainConfig.for_style(style, seed=cfg.style_seed(style), **overrides)
        model, report = train_regressor(feats, targs, tc)
        configio.dump_json(
            cfg.models / f"regressor_{style.value}.json", model.to_dict(), cfg.hash, cfg.seed
        )
        configio.write_csv(
            cfg.models / f"train_report_{style.value}.csv",
            ("epoch", "train_mae", "val_mae"),
            report.epoch_rows(),
            comment_lines=[cfg.header],
        )
        configio.dump_json(
            cfg.models / f"train_summary_{style.value}.json", report.summary(), cfg.hash, cfg.seed
        )
        print(
            f"train-regressor[{style.value}]: test MAE {report.test_mae:.4f} "
            f"after {report.n_epochs} epochs (best {report.best_epoch + 1})"
        )
    return 0


def cmd_calibrate_idm(cfg: RunConfig) -> int:
    cfg.models.mkdir(parents=True, exist_ok=True)
    for style in cfg.styles:
        feats, targs = _load_dataset(cfg, style)
        states = idm_states_from_features(feats)
        init = cfg.base_idm(style_defaults(style).time_gap)
        result = calibrate_idm_mae(
            states,
            targs,
            init,
            cfg.calibration_bounds(),
            grid_points=cfg.get_int("calib.grid_points"),
            simplex_iters=cfg.get_int("calib.simplex_iters"),
        )
        configio.dump_json(
            cfg.models / f"idm_{style.value}.json",
            {
                "style": style.value,
                "params": result.params.to_dict(),
                "mae": result.mae,
                "n_evals": result.n_evals,
                "init": init.to_dict(),
            },
            cfg.hash,
            cfg.seed,
        )
        print(f"calibrate-idm[{style.value}]: MAE {result.mae:.4f} in {result.n_evals} evaluations")
    return 0


def cmd_train_agent(cfg: RunConfig) -> int:
    cfg.models.mkdir(parents=True, exist_ok=True)
    for style in cfg.styles:
        model = _load_regressor(cfg, style)
        pool, eval_traces = _split_pool(cfg, style)
        result = train_agent_loop(
            pool,
            model,
            cfg.agent_hyperparams(style),
            CurriculumSchedule(switch_episode=cfg.get_int("agent.switch_episode")),
            n_episodes=cfg.get_int("agent.n_episodes"),
            eval_traces=eval_traces,
            env_config=cfg.env_config(),
            eval_every=cfg.get_int("agent.eval_every"),
        )
        configio.dump_json(
            cfg.models / f"agent_{style.value}.json", result.best_checkpoint, cfg.hash, cfg.seed
        )
        configio.write_csv(
            cfg.models / f"agent_log_{style.value}.csv",
            EPISODE_LOG_COLUMNS,
            result.episode_rows,
            comment_lines=[cfg.header],
        )
        configio.write_csv(
            cfg.models / f"agent_eval_{style.value}.csv",
            EVAL_LOG_COLUMNS,
            result.eval_rows,
            comment_lines=[cfg.header],
        )
        print(
            f"train-agent[{style.value}]: best eval reward {result.best_eval.mean_reward:.2f}, "
            f"violation rate {result.best_eval.violation_rate:.3f}"
        )
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    edir = cfg.out / "evaluate"
    edir.mkdir(parents=True, exist_ok=True)
    for style in cfg.styles:
        agent_path = cfg.models / f"agent_{style.value}.json"
        if not agent_path.exists():
            raise MissingUpstream("train-agent")
        checkpoint = configio.load_json(agent_path)
        agent = SacAgent.from_checkpoint(checkpoint)
        model = _load_regressor(cfg, style)
        _, eval_traces = _split_pool(cfg, style)
        metrics, _ = evaluate_agent(
            agent,
            eval_traces,
            model,
            cfg.env_config(),
            rate_limited=bool(checkpoint.get("curriculum_phase", 0)),
        )
        payload = {"style": style.value, **metrics.to_dict()}
        configio.dump_json(edir / f"eval_{style.value}.json", payload, cfg.hash, cfg.seed)
        print(
            f"evaluate[{style.value}]: reward {metrics.mean_reward:.2f}, "
            f"violation rate {metrics.violation_rate:.3f}, min headway {metrics.min_headway:.2f}"
        )
    return 0


def cmd_report(cfg: RunConfig) -> int:
    rdir = cfg.out / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    any_predictor = False

    mae_per_style: dict[Style, dict] = {}
    for style in cfg.styles:
        ds_path = cfg.out / "classify" / f"dataset_{style.value}.csv"
        if not ds_path.exists():
            continue
        feats, targs = _load_dataset(cfg, style)
        entry: dict = {}
        model_path = cfg.models / f"regressor_{style.value}.json"
        if model_path.exists():
            model = MlpModel.from_dict(configio.load_json(model_path))
            entry["dnn"] = mae(model.predict(feats), targs)
            any_predictor = True
        else:
            entry["dnn"] = None
        fixed = cfg.base_idm(style_defaults(wrong_style(style)).time_gap)
        entry["idm_fixed"] = idm_mae_on_features(fixed, feats, targs)
        idm_path = cfg.models / f"idm_{style.value}.json"
        if idm_path.exists():
            params = IdmParams.from_dict(configio.load_json(idm_path)["params"])
            entry["idm_calibrated"] = idm_mae_on_features(params, feats, targs)
            any_predictor = True
        else:
            entry["idm_calibrated"] = None
        mae_per_style[style] = entry

    if not any_predictor:
        raise NothingToReport("no trained regressor or calibrated baseline found")

    cols, rows, text = build_mae_table(mae_per_style)
    configio.write_csv(rdir / "mae_table.csv", cols, rows, comment_lines=[cfg.header])
    (rdir / "mae_table.txt").write_text(cfg.header + "\n" + text)

    rmse_per_style: dict[Style, float] = {}
    for style in cfg.styles:
        eval_path = cfg.out / "evaluate" / f"eval_{style.value}.json"
        if eval_path.exists():
            rmse_per_style[style] = float(configio.load_json(eval_path)["rmse_vs_predictor"])
    cols, rows, text = build_rmse_table(rmse_per_style)
    configio.write_csv(rdir / "rmse_table.csv", cols, rows, comment_lines=[cfg.header])
    (rdir / "rmse_table.txt").write_text(cfg.header + "\n" + text)

    for style in cfg.styles:
        agent_path = cfg.models / f"agent_{style.value}.json"
        model_path = cfg.models / f"regressor_{style.value}.json"
        if not (agent_path.exists() and model_path.exists()):
            continue
        checkpoint = configio.load_json(agent_path)
        agent = SacAgent.from_checkpoint(checkpoint)
        model = MlpModel.from_dict(configio.load_json(model_path))
        _, eval_traces = _split_pool(cfg, style)
        for k, ep in enumerate(eval_traces):
            env = CarFollowEnv(ep, model, cfg.env_config())
            env.set_rate_limit(bool(checkpoint.get("curriculum_phase", 0)))
            roll = run_rollout(env, agent.act_deterministic)
            configio.write_csv(
                rdir / f"rollout_{style.value}_{k:02d}.csv",
                ROLLOUT_COLUMNS,
                roll.rows,
                comment_lines=[cfg.header],
            )
        log_path = cfg.models / f"agent_log_{style.value}.csv"
        if log_path.exists():
            cols, lrows, _ = configio.read_csv(log_path)
            e_idx, l_idx = cols.index("episode"), cols.index("lambda")
            configio.write_csv(
                rdir / f"lambda_{style.value}.csv",
                ("episode", "lambda"),
                [[r[e_idx], r[l_idx]] for r in lrows],
                comment_lines=[cfg.header],
            )

    print(f"report: tables and rollouts written to {rdir}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "classify": cmd_classify,
    "train-regressor": cmd_train_regressor,
    "calibrate-idm": cmd_calibrate_idm,
    "train-agent": cmd_train_agent,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file")
    common.add_argument("--seed", type=int, metavar="N", help="run seed (overrides config)")
    common.add_argument("--style", choices=_STYLE_CHOICES, help="style selection")
    common.add_argument(
        "--synthetic", type=int, metavar="N", help="generate N synthetic episodes per style"
    )
    parser = argparse.ArgumentParser(
        prog="carfollow",
        description="Driving-style-aware car-following pipeline: data, models, agents, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args)
        return COMMANDS[args.command](cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (MissingUpstream, NothingToReport) as e:
        print(f"missing upstream artifact: {e}", file=sys.stderr)
        return 4
    except CarFollowError as e:
        print(f"data error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
