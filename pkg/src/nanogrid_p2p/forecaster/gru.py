"""GRU cell and stacked-layer forward/backward passes in plain numpy.

Row-vector convention: inputs are ``(batch, features)`` and a layer maps
them with ``x @ W`` where ``W`` has shape ``(input_size, 3 * hidden)``. The
three column blocks of ``W``, ``U`` and ``b`` belong to the update gate z,
the reset gate r and the candidate state, in that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


def sigmoid(x):
    # tanh form never overflows
    return 0.5 + 0.5 * np.tanh(0.5 * x)


@dataclass
class GruLayerParams:
    W: np.ndarray  # (input_size, 3H)
    U: np.ndarray  # (H, 3H)
    b: np.ndarray  # (3H,)

    def __post_init__(self):
        if self.W.ndim != 2 or self.U.ndim != 2 or self.b.ndim != 1:
            raise DimensionError("W and U must be matrices and b a vector")
        h = self.U.shape[0]
        if self.U.shape != (h, 3 * h) or self.W.shape[1] != 3 * h or self.b.shape != (3 * h,):
            raise DimensionError(
                f"inconsistent GRU shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}"
            )
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.U)) and np.all(np.isfinite(self.b))):
            raise ValueError("GRU parameters must be finite")

    @property
    def input_size(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.U.shape[0]

    @classmethod
    def from_gates(cls, W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h) -> "GruLayerParams":
        """Assemble from per-gate blocks given in the same row convention."""
        W = np.concatenate([np.atleast_2d(W_z), np.atleast_2d(W_r), np.atleast_2d(W_h)], axis=1)
        U = np.concatenate([np.atleast_2d(U_z), np.atleast_2d(U_r), np.atleast_2d(U_h)], axis=1)
        b = np.concatenate([np.atleast_1d(b_z), np.atleast_1d(b_r), np.atleast_1d(b_h)])
        return cls(W.astype(float), U.astype(float), b.astype(float))

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "GruLayerParams":
        H = hidden_size
        return cls(np.zeros((input_size, 3 * H)), np.zeros((H, 3 * H)), np.zeros(3 * H))

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "GruLayerParams":
        H = hidden_size
        k = 1.0 / np.sqrt(H)
        return cls(
            rng.uniform(-k, k, (input_size, 3 * H)),
            rng.uniform(-k, k, (H, 3 * H)),
            rng.uniform(-k, k, 3 * H),
        )


def gru_cell(x: np.ndarray, h: np.ndarray, p: GruLayerParams) -> np.ndarray:
    """One step of the cell; ``x`` and ``h`` may be vectors or batches."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.shape[-1] != p.input_size or h.shape[-1] != p.hidden_size:
        raise DimensionError(
            f"cell expects input {p.input_size} and hidden {p.hidden_size}, got {x.shape[-1]} and {h.shape[-1]}"
        )
    h_new, _ = _step(x @ p.W + p.b, h, p.U)
    return h_new


def _step(xw: np.ndarray, h: np.ndarray, U: np.ndarray):
    H = U.shape[0]
    zr = sigmoid(xw[..., :2 * H] + h @ U[:, :2 * H])
    z, r = zr[..., :H], zr[..., H:]
    rh = r * h
    cand = np.tanh(xw[..., 2 * H:] + rh @ U[:, 2 * H:])
    h_new = h + z * (cand - h)
    return h_new, (h, z, r, rh, cand)


def layer_forward(xs: np.ndarray, p: GruLayerParams):
    """Run a layer over ``xs`` of shape (T, batch, input); h starts at zero.

    Returns the hidden sequence (T, batch, H) and the cache for backward.
    """
    T, B, _ = xs.shape
    H = p.hidden_size
    xw = xs @ p.W + p.b
    U_zr = np.ascontiguousarray(p.U[:, :2 * H])
    U_h = np.ascontiguousarray(p.U[:, 2 * H:])
    h = np.zeros((B, H), dtype=xs.dtype)
    hs = np.empty((T + 1, B, H), dtype=xs.dtype)
    hs[0] = h
    zr_all = np.empty((T, B, 2 * H), dtype=xs.dtype)
    rh_all = np.empty((T, B, H), dtype=xs.dtype)
    cand_all = np.empty((T, B, H), dtype=xs.dtype)
    for t in range(T):
        zr = sigmoid(xw[t, :, :2 * H] + h @ U_zr)
        rh = zr[:, H:] * h
        cand = np.tanh(xw[t, :, 2 * H:] + rh @ U_h)
        h = h + zr[:, :H] * (cand - h)
        hs[t + 1] = h
        zr_all[t], rh_all[t], cand_all[t] = zr, rh, cand
    return hs[1:], (xs, hs, zr_all, rh_all, cand_all)


def layer_backward(dhs: np.ndarray, cache, p: GruLayerParams, need_input_grad: bool = True):
    """Gradients of a layer given dL/dh for every step.

    Returns (dxs, dW, dU, db); ``dxs`` is None when not requested.
    """
    xs, hs, zr_all, rh_all, cand_all = cache
    T, B, _ = xs.shape
    H = p.hidden_size
    U_zrT = np.ascontiguousarray(p.U[:, :2 * H].T)
    U_hT = np.ascontiguousarray(p.U[:, 2 * H:].T)
    dxw = np.empty((T, B, 3 * H), dtype=xs.dtype)
    dh_next = np.zeros((B, H), dtype=xs.dtype)
    for t in range(T - 1, -1, -1):
        h_prev = hs[t]
        z, r = zr_all[t, :, :H], zr_all[t, :, H:]
        cand = cand_all[t]
        dh = dhs[t] + dh_next
        da_h = dh * z * (1.0 - cand * cand)
        drh = da_h @ U_hT
        da_zr = dxw[t, :, :2 * H]
        da_zr[:, :H] = dh * (cand - h_prev) * z * (1.0 - z)
        da_zr[:, H:] = drh * h_prev * r * (1.0 - r)
        dxw[t, :, 2 * H:] = da_h
        dh_next = dh * (1.0 - z) + drh * r + da_zr @ U_zrT
    dU = np.empty_like(p.U)
    dU[:, :2 * H] = hs[:-1].reshape(T * B, H).T @ dxw[:, :, :2 * H].reshape(T * B, 2 * H)
    dU[:, 2 * H:] = rh_all.reshape(T * B, H).T @ dxw[:, :, 2 * H:].reshape(T * B, H)
    flat_d = dxw.reshape(T * B, -1)
    dW = xs.reshape(T * B, -1).T @ flat_d
    db = flat_d.sum(axis=0)
    dxs = dxw @ p.W.T if need_input_grad else None
    return dxs, dW, dU, db
