"""Windowing, training with Adam, validation scoring and dataset files."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._io import read_rows
from .model import FEATURES, INPUT_STEPS, OUTPUT_STEPS, ForecastModel, MinMaxNormalizer, persistence_forecast

log = logging.getLogger(__name__)

WINDOW = INPUT_STEPS + OUTPUT_STEPS


class DataError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 200
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    dropout: float = 0.2
    clip_norm: float = 1.0
    train_fraction: float = 0.8
    hidden: int = 32
    gru_layers: int = 6
    dense_sizes: tuple[int, int] = (64, 32)
    # stop after this many epochs without a validation improvement (0 = never)
    patience: int = 20
    # arithmetic precision of training; the returned model is always float64
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("epochs", "batch_size", "learning_rate", "clip_norm", "hidden", "gru_layers"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")


def make_windows(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stride-1 windows: inputs (n, 6, 2) and targets (n, 3, 2)."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != FEATURES:
        raise DataError(f"dataset must have shape (slots, {FEATURES})")
    if len(data) < WINDOW:
        raise DataError(f"dataset needs at least {WINDOW} slots, got {len(data)}")
    idx = np.arange(len(data) - WINDOW + 1)[:, None] + np.arange(WINDOW)
    w = data[idx]
    return w[:, :INPUT_STEPS], w[:, INPUT_STEPS:]


def chronological_split(n_windows: int, train_fraction: float) -> int:
    """Number of leading windows used for training (at least one each side)."""
    if n_windows < 2:
        raise DataError("need at least two windows for a train/validation split")
    return min(max(1, int(round(n_windows * train_fraction))), n_windows - 1)


class Adam:
    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


def clip_global_norm(grads: list[np.ndarray], threshold: float) -> float:
    """Scale gradients in place so their joint L2 norm is at most ``threshold``.

    Returns the norm before clipping.
    """
    norm = math.sqrt(math.fsum(float(np.vdot(g, g)) for g in grads))
    if norm > threshold:
        scale = threshold / norm
        for g in grads:
            g *= scale
    return norm


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass(frozen=True)
class TrainResult:
    model: ForecastModel
    val_rmse: np.ndarray
    baseline_rmse: np.ndarray
    epochs_run: int
    best_epoch: int


def range_normalized_rmse(pred: np.ndarray, target: np.ndarray, span: np.ndarray) -> np.ndarray:
    """Per-feature RMSE over all horizons, divided by the feature's range."""
    err = (pred - target).reshape(-1, FEATURES)
    rmse = np.sqrt(np.mean(err * err, axis=0))
    return rmse / np.where(span > 0, span, 1.0)


def train(data: np.ndarray, cfg: TrainConfig = TrainConfig(), rng: np.random.Generator | int = 0) -> TrainResult:
    """Fit a forecaster on a per-slot (load, PV) series.

    Windows are split chronologically; the normalizer sees only the training
    part. The parameters with the lowest validation loss are returned.
    """
    rng = np.random.default_rng(rng)
    data = np.asarray(data, dtype=float)
    X, Y = make_windows(data)
    n_train = chronological_split(len(X), cfg.train_fraction)
    norm = MinMaxNormalizer().fit(data[: n_train + WINDOW - 1])
    Xn = norm.transform(X)
    Yn = norm.transform(Y).reshape(len(Y), -1)
    dt = np.dtype(cfg.dtype)
    Xtr, Ytr, Xva, Yva = (a.astype(dt) for a in (Xn[:n_train], Yn[:n_train], Xn[n_train:], Yn[n_train:]))

    model = ForecastModel.init(rng, cfg.hidden, cfg.gru_layers, cfg.dense_sizes, cfg.dropout).astype(dt)
    model.normalizer = norm
    params = model.parameters()
    opt = Adam(params, cfg)
    best_val, best_epoch, best_params = math.inf, 0, [p.copy() for p in params]
    epochs_run = 0
    for epoch in range(1, cfg.epochs + 1):
        epochs_run = epoch
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            out, cache = model.forward(Xtr[batch], dropout_rng=rng)
            loss, dout = mse_loss(out, Ytr[batch])
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"training loss became {loss} in epoch {epoch}; try a lower learning rate"
                )
            grads = model.backward(dout, cache)
            clip_global_norm(grads, cfg.clip_norm)
            opt.step(grads)
        val_loss, _ = mse_loss(model.predict_normalized(Xva), Yva)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"validation loss became {val_loss} in epoch {epoch}; try a lower learning rate")
        if val_loss < best_val:
            best_val, best_epoch = val_loss, epoch
            best_params = [p.copy() for p in params]
        log.debug("epoch %d val_mse %.6g (best %.6g @ %d)", epoch, val_loss, best_val, best_epoch)
        if cfg.patience and epoch - best_epoch >= cfg.patience:
            break
    for p, b in zip(params, best_params):
        p[...] = b
    model.astype(np.float64)

    span = data.max(axis=0) - data.min(axis=0)
    pred = model.forecast(X[n_train:])
    val_rmse = range_normalized_rmse(pred, Y[n_train:], span)
    base_rmse = range_normalized_rmse(persistence_forecast(X[n_train:]), Y[n_train:], span)
    model.metadata = {
        "val_rmse": val_rmse.tolist(),
        "baseline_rmse": base_rmse.tolist(),
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
    }
    return TrainResult(model, val_rmse, base_rmse, epochs_run, best_epoch)


def write_dataset(path: str | Path, load_kw: np.ndarray, pv_kw: np.ndarray, start_slot: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot_abs", "load_kw", "pv_kw"])
        for i, (a, b) in enumerate(zip(load_kw, pv_kw)):
            w.writerow([start_slot + i, repr(float(a)), repr(float(b))])


def read_dataset(path: str | Path) -> np.ndarray:
    """(slots, 2) array of (load kW, PV kW) ordered by ``slot_abs``."""
    rows = sorted(read_rows(path, ("slot_abs", "load_kw", "pv_kw")), key=lambda r: int(r["slot_abs"]))
    if not rows:
        raise DataError(f"{path}: empty dataset")
    return np.array([[float(r["load_kw"]), float(r["pv_kw"])] for r in rows])
