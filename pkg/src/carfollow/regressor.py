"""Per-style acceleration regressors.

A small dense network per driving style maps a short window of lead-vehicle
motion plus the current ego state to the acceleration a human driver would
apply.  Training minimizes mean absolute error with inverted dropout,
feature standardization, and validation-based early stopping; everything is
plain numpy and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, IndexTooEarly, LengthMismatch, TooFewSamples
from .kinematics import headway
from .nets import Adam, Mlp, relative_error
from .styles import Style
from .trajectory import EpisodeTrace

N_FEATURES = 8
FEATURE_NAMES = (
    "lead_accel_m2",
    "lead_accel_m1",
    "lead_accel_0",
    "lead_speed_m2",
    "lead_speed_m1",
    "lead_speed_0",
    "ego_speed",
    "headway",
)
MIN_TRAIN_SAMPLES = 100
MODEL_FORMAT_VERSION = 1

_HIDDEN_SIZES = {
    Style.AGGRESSIVE: (256, 128, 64),
    Style.NORMAL: (256, 256, 128),
    Style.CONSERVATIVE: (256, 128, 64),
}
_BATCH_SIZES = {Style.AGGRESSIVE: 32, Style.NORMAL: 64, Style.CONSERVATIVE: 64}


def build_features(ep: EpisodeTrace, t_index: int) -> np.ndarray:
    """Feature vector at step t: lead accel and speed over (t-2, t-1, t),
    ego speed at t, and time headway at t."""
    t = int(t_index)
    if t < 2:
        raise IndexTooEarly(f"t_index={t}: two past lead samples required")
    if t >= ep.n_steps:
        raise IndexTooEarly(f"t_index={t} beyond trace of {ep.n_steps} steps")
    gap = ep.lead_pos[t] - ep.ego_pos[t]
    return np.array(
        [
            ep.lead_accel[t - 2],
            ep.lead_accel[t - 1],
            ep.lead_accel[t],
            ep.lead_speed[t - 2],
            ep.lead_speed[t - 1],
            ep.lead_speed[t],
            ep.ego_speed[t],
            headway(gap, ep.ego_speed[t]),
        ],
        dtype=np.float64,
    )


def episode_features_targets(ep: EpisodeTrace) -> tuple[np.ndarray, np.ndarray]:
    """All (feature, recorded ego acceleration) pairs of one episode.

    Rows cover t = 2 .. n-1; the target is the driver's acceleration at the
    same step the observation describes.
    """
    n = ep.n_steps
    if n < 3:
        raise TooFewSamples(n, 3)
    rows = np.stack([build_features(ep, t) for t in range(2, n)])
    targets = ep.ego_accel[2:n].copy()
    return rows, targets


def dataset_from_episodes(episodes) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate feature/target pairs over a list of episodes."""
    feats, targs = [], []
    for ep in episodes:
        f, t = episode_features_targets(ep)
        feats.append(f)
        targs.append(t)
    if not feats:
        raise EmptyDataset("no episodes given")
    return np.concatenate(feats, axis=0), np.concatenate(targs, axis=0)


@dataclass(frozen=True)
class Scaler:
    """Per-feature standardization fitted on a training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Scaler":
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise EmptyDataset("scaler needs a non-empty 2-D feature matrix")
        mean = x.mean(axis=0)
        std = x.std(axis=0)  # population std
        std = np.maximum(std, 1e-8)
        return cls(mean=mean, std=std)

    def apply(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.mean.shape[0]:
            raise DimensionMismatch(f"feature width {x.shape[-1]} != {self.mean.shape[0]}")
        return (x - self.mean) / self.std

    def unapply(self, normalized: np.ndarray) -> np.ndarray:
        x = np.asarray(normalized, dtype=np.float64)
        if x.shape[-1] != self.mean.shape[0]:
            raise DimensionMismatch(f"feature width {x.shape[-1]} != {self.mean.shape[0]}")
        return x * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(
            mean=np.array(d["mean"], dtype=np.float64),
            std=np.array(d["std"], dtype=np.float64),
        )


@dataclass(frozen=True)
class TrainConfig:
    style: Style
    hidden_sizes: tuple[int, ...]
    batch_size: int
    learning_rate: float = 1e-4
    dropout_rates: tuple[float, ...] = (0.2, 0.15, 0.1)
    min_delta: float = 0.001
    patience: int = 5
    val_fraction: float = 0.15
    test_fraction: float = 0.20
    max_epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_fraction + self.test_fraction < 1.0:
            raise ValueError("validation and test fractions must leave room for training data")
        if len(self.dropout_rates) != len(self.hidden_sizes):
            raise ValueError("one dropout rate per hidden layer required")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch size, epochs, and patience must be positive")

    @classmethod
    def for_style(cls, style: Style, *, seed: int = 0, **overrides) -> "TrainConfig":
        kwargs = dict(
            style=style,
            hidden_sizes=_HIDDEN_SIZES[style],
            batch_size=_BATCH_SIZES[style],
            seed=seed,
        )
        kwargs.update(overrides)
        if "dropout_rates" not in overrides and len(kwargs["hidden_sizes"]) != 3:
            kwargs["dropout_rates"] = tuple(0.1 for _ in kwargs["hidden_sizes"])
        return cls(**kwargs)


@dataclass
class MlpModel:
    """Trained regressor: network, scaler, and identity metadata."""

    net: Mlp
    scaler: Scaler
    style: Style
    dropout_rates: tuple[float, ...]
    seed: int

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Deterministic inference; accepts one vector or a batch."""
        x = np.asarray(features, dtype=np.float64)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != N_FEATURES:
            raise DimensionMismatch(f"expected {N_FEATURES} features, got {x2.shape[1]}")
        out, _ = self.net.forward(self.scaler.apply(x2))
        out = out[:, 0]
        return float(out[0]) if single else out

    def predict_episode(self, ep: EpisodeTrace) -> np.ndarray:
        feats, _ = episode_features_targets(ep)
        return np.asarray(self.predict(feats))

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "style_regressor",
            "style": self.style.value,
            "seed": self.seed,
            "dropout_rates": list(self.dropout_rates),
            "scaler": self.scaler.to_dict(),
            "net": self.net.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        if int(d.get("format_version", -1)) != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
        return cls(
            net=Mlp.from_dict(d["net"]),
            scaler=Scaler.from_dict(d["scaler"]),
            style=Style.from_string(d["style"]),
            dropout_rates=tuple(float(r) for r in d["dropout_rates"]),
            seed=int(d["seed"]),
        )


@dataclass
class TrainingReport:
    style: Style
    train_mae: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    best_epoch: int = -1
    test_mae: float = float("nan")
    n_params: int = 0
    n_train: int = 0
    n_val: int = 0
    n_test: int = 0
    stopped_early: bool = False

    @property
    def n_epochs(self) -> int:
        return len(self.train_mae)

    def epoch_rows(self) -> list[list]:
        return [
            [e + 1, float(tr), float(va)]
            for e, (tr, va) in enumerate(zip(self.train_mae, self.val_mae))
        ]

    def summary(self) -> dict:
        return {
            "style": self.style.value,
            "n_epochs": self.n_epochs,
            "best_epoch": self.best_epoch + 1,
            "test_mae": float(self.test_mae),
            "n_params": self.n_params,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "stopped_early": self.stopped_early,
        }


def mae(pred: np.ndarray, actual: np.ndarray) -> float:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise LengthMismatch(f"{p.shape[0]} predictions vs {a.shape[0]} targets")
    if p.size == 0:
        raise EmptyDataset("mae of empty vectors")
    return float(np.mean(np.abs(p - a)))


def _split_indices(n: int, cfg: TrainConfig, rng: np.random.Generator):
    n_val = int(round(cfg.val_fraction * n))
    n_test = int(round(cfg.test_fraction * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise TooFewSamples(n, MIN_TRAIN_SAMPLES)
    perm = rng.permutation(n)
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]


def train_regressor(
    features: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
) -> tuple[MlpModel, TrainingReport]:
    """Fit one style's regressor with MAE loss and early stopping.

    The data is shuffled once into train/validation/test splits; the scaler
    is fitted on the training split only.  Training stops when validation
    MAE has not improved by at least min_delta for `patience` consecutive
    epochs, and the weights from the best validation epoch are returned.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[1] != N_FEATURES:
        raise DimensionMismatch(f"features must be (n, {N_FEATURES})")
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{x.shape[0]} feature rows vs {y.shape[0]} targets")
    if x.shape[0] < MIN_TRAIN_SAMPLES:
        raise TooFewSamples(x.shape[0], MIN_TRAIN_SAMPLES)

    root = np.random.SeedSequence([int(cfg.seed), 11])
    ss_split, ss_init, ss_batches, ss_dropout = root.spawn(4)
    idx_train, idx_val, idx_test = _split_indices(x.shape[0], cfg, np.random.default_rng(ss_split))

    scaler = Scaler.fit(x[idx_train])
    x_train, y_train = scaler.apply(x[idx_train]), y[idx_train]
    x_val, y_val = scaler.apply(x[idx_val]), y[idx_val]
    x_test, y_test = scaler.apply(x[idx_test]), y[idx_test]

    sizes = (N_FEATURES, *cfg.hidden_sizes, 1)
    net = Mlp.init(sizes, np.random.default_rng(ss_init))
    opt = Adam(net, lr=cfg.learning_rate)
    batch_rng = np.random.default_rng(ss_batches)
    drop_rng = np.random.default_rng(ss_dropout)

    report = TrainingReport(
        style=cfg.style,
        n_params=net.n_params,
        n_train=len(idx_train),
        n_val=len(idx_val),
        n_test=len(idx_test),
    )
    best_net = net.copy()
    best_val = float("inf")
    patience_best = float("inf")
    fails = 0
    n_train = x_train.shape[0]

    for epoch in range(cfg.max_epochs):
        order = batch_rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            xb, yb = x_train[batch], y_train[batch]
            masks = [
                (drop_rng.random((xb.shape[0], width)) >= rate) / (1.0 - rate)
                for width, rate in zip(cfg.hidden_sizes, cfg.dropout_rates)
            ]
            out, cache = net.forward(xb, dropout_masks=masks)
            resid = out[:, 0] - yb
            d_out = (np.sign(resid) / xb.shape[0])[:, None]
            gw, gb = net.backward(cache, d_out)[:2]
            opt.step(gw, gb)

        train_pred, _ = net.forward(x_train)
        val_pred, _ = net.forward(x_val)
        epoch_train = mae(train_pred[:, 0], y_train)
        epoch_val = mae(val_pred[:, 0], y_val)
        report.train_mae.append(epoch_train)
        report.val_mae.append(epoch_val)

        if epoch_val < best_val:
            best_val = epoch_val
            best_net = net.copy()
            report.best_epoch = epoch
        if epoch_val <= patience_best - cfg.min_delta:
            patience_best = epoch_val
            fails = 0
        else:
            fails += 1
            if fails >= cfg.patience:
                report.stopped_early = True
                break

    model = MlpModel(
        net=best_net,
        scaler=scaler,
        style=cfg.style,
        dropout_rates=cfg.dropout_rates,
        seed=cfg.seed,
    )
    test_pred, _ = best_net.forward(x_test)
    report.test_mae = mae(test_pred[:, 0], y_test)
    return model, report


def _huber(resid: np.ndarray, delta: float) -> float:
    a = np.abs(resid)
    quad = 0.5 * resid**2 / delta
    lin = a - 0.5 * delta
    return float(np.mean(np.where(a <= delta, quad, lin)))


def _huber_grad(resid: np.ndarray, delta: float) -> np.ndarray:
    return np.where(np.abs(resid) <= delta, resid / delta, np.sign(resid)) / resid.size


def gradient_check(
    model: MlpModel,
    features: np.ndarray,
    targets: np.ndarray,
    *,
    delta: float = 1e-6,
    h: float = 1e-5,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Uses a smooth near-zero surrogate of the absolute error so the
    finite-difference oracle is well defined; dropout stays off.
    """
    x = model.scaler.apply(np.atleast_2d(np.asarray(features, dtype=np.float64)))
    y = np.asarray(targets, dtype=np.float64).ravel()
    net = model.net

    out, cache = net.forward(x)
    d_out = _huber_grad(out[:, 0] - y, delta)[:, None]
    gw, gb = net.backward(cache, d_out)[:2]

    worst = 0.0
    for layer in range(net.n_layers):
        for param, analytic in ((net.weights[layer], gw[layer]), (net.biases[layer], gb[layer])):
            flat = param.ravel()
            aflat = analytic.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = _huber(net.forward(x)[0][:, 0] - y, delta)
                flat[i] = orig - h
                down = _huber(net.forward(x)[0][:, 0] - y, delta)
                flat[i] = orig
                numeric = (up - down) / (2.0 * h)
                worst = max(worst, relative_error(np.array([aflat[i]]), np.array([numeric])))
    return worst
