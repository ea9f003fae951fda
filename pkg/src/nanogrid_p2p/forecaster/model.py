"""Stacked-GRU forecaster: 6 past (load, PV) pairs in, 3 future pairs out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gru import DimensionError, GruLayerParams, layer_backward, layer_forward

INPUT_STEPS = 6
OUTPUT_STEPS = 3
FEATURES = 2
MODEL_FORMAT = "nanogrid-gru"
MODEL_VERSION = 1


class ModelNotReadyError(RuntimeError):
    pass


@dataclass
class MinMaxNormalizer:
    """Per-feature affine map of the fitted [min, max] onto [0, 1]."""

    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.lo is not None and self.hi is not None

    def fit(self, data: np.ndarray) -> "MinMaxNormalizer":
        data = np.asarray(data, dtype=float)
        self.lo = data.min(axis=0)
        self.hi = data.max(axis=0)
        return self

    @property
    def span(self) -> np.ndarray:
        if not self.fitted:
            raise ModelNotReadyError("normalizer has not been fitted")
        s = self.hi - self.lo
        # a constant feature maps to 0 instead of dividing by zero
        return np.where(s > 0, s, 1.0)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.lo) / self.span

    def inverse(self, y: np.ndarray) -> np.ndarray:
        return y * self.span + self.lo


@dataclass
class Dense:
    W: np.ndarray
    b: np.ndarray

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "Dense":
        k = 1.0 / np.sqrt(n_in)
        return cls(rng.uniform(-k, k, (n_in, n_out)), rng.uniform(-k, k, n_out))


@dataclass
class ForecastModel:
    """GRU stack followed by three dense layers (ReLU, ReLU, linear).

    Dropout sits after each ReLU layer and is active only when a dropout
    rng is passed to :meth:`forward`.
    """

    layers: list[GruLayerParams]
    dense: list[Dense]
    normalizer: MinMaxNormalizer = field(default_factory=MinMaxNormalizer)
    dropout: float = 0.2
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.dense) != 3:
            raise DimensionError("the head has exactly three dense layers")
        if self.layers[0].input_size != FEATURES:
            raise DimensionError(f"first GRU layer must take {FEATURES} features")
        for below, above in zip(self.layers, self.layers[1:]):
            if above.input_size != below.hidden_size:
                raise DimensionError("stacked GRU layer sizes do not chain")
        if self.dense[0].W.shape[0] != self.layers[-1].hidden_size:
            raise DimensionError("first dense layer must take the top GRU state")
        for a, b in zip(self.dense, self.dense[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise DimensionError("dense layer sizes do not chain")
        if self.dense[-1].W.shape[1] != OUTPUT_STEPS * FEATURES:
            raise DimensionError(f"output layer must emit {OUTPUT_STEPS * FEATURES} values")

    @classmethod
    def init(cls, rng: np.random.Generator, hidden: int = 32, gru_layers: int = 6,
             dense_sizes: tuple[int, int] = (64, 32), dropout: float = 0.2) -> "ForecastModel":
        layers = [GruLayerParams.init(FEATURES if i == 0 else hidden, hidden, rng) for i in range(gru_layers)]
        sizes = [hidden, *dense_sizes, OUTPUT_STEPS * FEATURES]
        dense = [Dense.init(a, b, rng) for a, b in zip(sizes, sizes[1:])]
        return cls(layers, dense, MinMaxNormalizer(), dropout)

    @classmethod
    def zeros(cls, hidden: int = 32, gru_layers: int = 6, dense_sizes: tuple[int, int] = (64, 32)) -> "ForecastModel":
        layers = [GruLayerParams.zeros(FEATURES if i == 0 else hidden, hidden) for i in range(gru_layers)]
        sizes = [hidden, *dense_sizes, OUTPUT_STEPS * FEATURES]
        dense = [Dense(np.zeros((a, b)), np.zeros(b)) for a, b in zip(sizes, sizes[1:])]
        return cls(layers, dense)

    # parameters are exposed as a flat list of arrays, updated in place by the optimizer
    def parameters(self) -> list[np.ndarray]:
        out = []
        for p in self.layers:
            out += [p.W, p.U, p.b]
        for d in self.dense:
            out += [d.W, d.b]
        return out

    def astype(self, dtype) -> "ForecastModel":
        """Convert every weight array to ``dtype`` in place."""
        for p in self.layers:
            p.W, p.U, p.b = p.W.astype(dtype), p.U.astype(dtype), p.b.astype(dtype)
        for d in self.dense:
            d.W, d.b = d.W.astype(dtype), d.b.astype(dtype)
        return self

    def forward(self, x: np.ndarray, dropout_rng: np.random.Generator | None = None):
        """Normalized (batch, 6, 2) -> normalized (batch, 6) plus backward cache."""
        seq = np.transpose(x, (1, 0, 2))
        caches = []
        for p in self.layers:
            seq, c = layer_forward(seq, p)
            caches.append(c)
        a = seq[-1]
        dense_cache = []
        for i, d in enumerate(self.dense):
            inp = a
            a = inp @ d.W + d.b
            mask = None
            if i < len(self.dense) - 1:
                a = np.maximum(a, 0.0)
                if dropout_rng is not None and self.dropout > 0:
                    keep = 1.0 - self.dropout
                    mask = ((dropout_rng.random(a.shape) < keep) / keep).astype(a.dtype)
                    a = a * mask
            dense_cache.append((inp, a, mask))
        return a, (caches, dense_cache, seq.shape)

    def backward(self, dout: np.ndarray, cache) -> list[np.ndarray]:
        """Gradients in the order of :meth:`parameters`."""
        caches, dense_cache, seq_shape = cache
        grads_dense = []
        g = dout
        for i in range(len(self.dense) - 1, -1, -1):
            d = self.dense[i]
            inp, out, mask = dense_cache[i]
            if i < len(self.dense) - 1:
                if mask is not None:
                    g = g * mask
                g = g * (out > 0)
            grads_dense.append((inp.T @ g, g.sum(axis=0)))
            g = g @ d.W.T
        grads_dense.reverse()
        dseq = np.zeros(seq_shape, dtype=g.dtype)
        dseq[-1] = g
        grads_gru = []
        for i in range(len(self.layers) - 1, -1, -1):
            dseq, dW, dU, db = layer_backward(dseq, caches[i], self.layers[i], need_input_grad=i > 0)
            grads_gru.append((dW, dU, db))
        grads_gru.reverse()
        out = []
        for dW, dU, db in grads_gru:
            out += [dW, dU, db]
        for dW, db in grads_dense:
            out += [dW, db]
        return out

    def predict_normalized(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward(x)
        return out

    def forecast(self, history: np.ndarray) -> np.ndarray:
        """Next three (load kW, PV kW) rows from the last six; PV is clamped at 0.

        Accepts one (6, 2) history or a batch (batch, 6, 2).
        """
        if not self.normalizer.fitted:
            raise ModelNotReadyError("forecast model has no fitted normalizer; train or load one first")
        h = np.asarray(history, dtype=float)
        single = h.ndim == 2
        if single:
            h = h[None]
        if h.shape[1:] != (INPUT_STEPS, FEATURES):
            raise DimensionError(f"history must be ({INPUT_STEPS}, {FEATURES}), got {h.shape[1:]}")
        out = self.predict_normalized(self.normalizer.transform(h))
        y = self.normalizer.inverse(out.reshape(-1, OUTPUT_STEPS, FEATURES))
        y[..., 1] = np.maximum(y[..., 1], 0.0)
        return y[0] if single else y

    # --- persistence ---------------------------------------------------------

    def save(self, path: str | Path, metadata: dict | None = None) -> None:
        """Write an ``.npz`` archive; ``header`` holds format, version and sizes as JSON."""
        if not self.normalizer.fitted:
            raise ModelNotReadyError("refusing to save a model without a fitted normalizer")
        header = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "gru_layers": len(self.layers),
            "hidden": self.layers[0].hidden_size,
            "dense_sizes": [d.W.shape[1] for d in self.dense[:-1]],
            "dropout": self.dropout,
            "metadata": {**self.metadata, **(metadata or {})},
        }
        arrays = {"header": np.array(json.dumps(header)), "norm_lo": self.normalizer.lo, "norm_hi": self.normalizer.hi}
        for i, p in enumerate(self.layers):
            arrays[f"gru{i}_W"], arrays[f"gru{i}_U"], arrays[f"gru{i}_b"] = p.W, p.U, p.b
        for i, d in enumerate(self.dense):
            arrays[f"dense{i}_W"], arrays[f"dense{i}_b"] = d.W, d.b
        with open(path, "wb") as fh:
            np.savez_compressed(fh, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "ForecastModel":
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            if header.get("format") != MODEL_FORMAT:
                raise ValueError(f"{path}: not a forecast model file")
            if header.get("version") != MODEL_VERSION:
                raise ValueError(f"{path}: unsupported model version {header.get('version')}")
            layers = [
                GruLayerParams(z[f"gru{i}_W"].astype(float), z[f"gru{i}_U"].astype(float), z[f"gru{i}_b"].astype(float))
                for i in range(header["gru_layers"])
            ]
            dense = [Dense(z[f"dense{i}_W"].astype(float), z[f"dense{i}_b"].astype(float)) for i in range(3)]
            norm = MinMaxNormalizer(z["norm_lo"].astype(float), z["norm_hi"].astype(float))
        return cls(layers, dense, norm, float(header["dropout"]), header.get("metadata", {}))


def persistence_forecast(history: np.ndarray) -> np.ndarray:
    """Repeat the most recent (load, PV) row for the next three slots."""
    h = np.asarray(history, dtype=float)
    return np.repeat(h[..., -1:, :], OUTPUT_STEPS, axis=-2)
