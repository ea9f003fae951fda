from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanogrid_p2p.forecaster import (
    DataError,
    DimensionError,
    ForecastModel,
    GruLayerParams,
    MinMaxNormalizer,
    MissingModelError,
    ModelNotReadyError,
    ModelStore,
    TrainConfig,
    clip_global_norm,
    gru_cell,
    make_windows,
    model_filename,
    persistence_forecast,
    read_dataset,
    train,
    write_dataset,
)
from nanogrid_p2p.forecaster.training import mse_loss

TINY = TrainConfig(epochs=40, hidden=8, gru_layers=2, dense_sizes=(8, 8), batch_size=50, patience=0)


def test_zero_cell_examples():
    p = GruLayerParams.zeros(2, 3)
    np.testing.assert_array_equal(gru_cell(np.ones(2), np.zeros(3), p), np.zeros(3))
    v = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(gru_cell(np.array([5.0, -4.0]), v, p), 0.5 * v, atol=1e-12)


def test_saturated_update_gate():
    p = GruLayerParams.from_gates(0, 0, 40.0, 0, 0, 0, 0, 0, 0.7)
    assert gru_cell([0.0], [0.25], p)[0] == pytest.approx(np.tanh(0.7), abs=1e-12)


def test_cell_shape_errors():
    with pytest.raises(DimensionError):
        gru_cell(np.ones(3), np.zeros(3), GruLayerParams.zeros(2, 3))
    with pytest.raises(DimensionError):
        GruLayerParams(np.zeros((2, 9)), np.zeros((3, 6)), np.zeros(9))


@given(st.integers(0, 2**32 - 1))
def test_cell_is_convex_combination(seed):
    r = np.random.default_rng(seed)
    p = GruLayerParams(r.normal(0, 2, (2, 12)), r.normal(0, 2, (4, 12)), r.normal(0, 2, 12))
    x, h = r.normal(0, 3, 2), r.normal(0, 3, 4)
    h_new = gru_cell(x, h, p)
    # h' lies between h and a tanh value in [-1, 1]
    lo, hi = np.minimum(h, -1.0), np.maximum(h, 1.0)
    assert np.all(h_new >= lo - 1e-12) and np.all(h_new <= hi + 1e-12)
    assert np.max(np.abs(h_new)) <= max(np.max(np.abs(h)), 1.0) + 1e-12


def gradient_check_worst(seed=0):
    r = np.random.default_rng(seed)
    m = ForecastModel.init(r, hidden=3, gru_layers=2, dense_sizes=(4, 4))
    x, y = r.random((4, 6, 2)), r.random((4, 6))
    out, cache = m.forward(x)
    _, dout = mse_loss(out, y)
    grads = m.backward(dout, cache)
    worst, eps = 0.0, 1e-6
    for p, g in zip(m.parameters(), grads):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + eps
            lp = mse_loss(m.forward(x)[0], y)[0]
            p[idx] = orig - eps
            lm = mse_loss(m.forward(x)[0], y)[0]
            p[idx] = orig
            fd = (lp - lm) / (2 * eps)
            worst = max(worst, abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8))
    return worst


def test_gradients_match_finite_differences():
    assert gradient_check_worst() < 1e-4


def test_clip_global_norm():
    g = [np.full(4, 3.0), np.full((2, 2), 4.0)]
    before = clip_global_norm(g, 1.0)
    assert before == pytest.approx(10.0)
    assert np.sqrt(sum(float(np.sum(a * a)) for a in g)) == pytest.approx(1.0)
    small = [np.full(3, 0.1)]
    clip_global_norm(small, 1.0)
    np.testing.assert_allclose(small[0], 0.1)


def test_persistence_examples():
    h = np.zeros((6, 2))
    h[-1] = (4, 2)
    np.testing.assert_array_equal(persistence_forecast(h), [[4, 2]] * 3)
    np.testing.assert_array_equal(persistence_forecast(np.zeros((6, 2))), np.zeros((3, 2)))


def test_zero_model_is_constant():
    m = ForecastModel.zeros(hidden=4, gru_layers=2, dense_sizes=(4, 4))
    m.dense[-1].b[:] = [0.5, 0.25] * 3
    m.normalizer = MinMaxNormalizer(np.array([0.0, 0.0]), np.array([10.0, 4.0]))
    r = np.random.default_rng(1)
    for _ in range(3):
        np.testing.assert_allclose(m.forecast(r.random((6, 2)) * 5), [[5.0, 1.0]] * 3, atol=1e-12)


def test_unfitted_model_refuses():
    with pytest.raises(ModelNotReadyError):
        ForecastModel.zeros().forecast(np.zeros((6, 2)))


def test_windows():
    data = np.arange(40, dtype=float).reshape(20, 2)
    X, Y = make_windows(data)
    assert X.shape == (12, 6, 2) and Y.shape == (12, 3, 2)
    np.testing.assert_array_equal(Y[0, 0], data[6])
    with pytest.raises(DataError):
        make_windows(data[:8])


def test_constant_series_is_learned():
    data = np.tile([3.0, 1.5], (600, 1))
    res = train(data, TINY, rng=0)
    assert np.all(res.val_rmse < 0.01)
    f = res.model.forecast(np.tile([3.0, 1.5], (6, 1)))
    np.testing.assert_allclose(f, [[3.0, 1.5]] * 3, rtol=0.05)


def test_training_is_deterministic():
    r = np.random.default_rng(5)
    t = np.arange(400)
    data = np.column_stack([2 + np.sin(t / 9) + 0.1 * r.random(400), np.maximum(0, np.sin(t / 20))])
    cfg = TrainConfig(epochs=5, hidden=6, gru_layers=2, dense_sizes=(6, 6), batch_size=64, patience=0)
    a, b = train(data, cfg, rng=3), train(data, cfg, rng=3)
    assert a.val_rmse.tobytes() == b.val_rmse.tobytes()


def test_short_dataset_rejected():
    with pytest.raises(DataError):
        train(np.ones((8, 2)), TINY)


def test_model_file_round_trip(tmp_path):
    m = ForecastModel.init(np.random.default_rng(2), hidden=4, gru_layers=2, dense_sizes=(4, 4))
    m.normalizer = MinMaxNormalizer().fit(np.array([[0.0, 0.0], [6.0, 3.0]]))
    path = tmp_path / model_filename(2.23)
    assert path.name == "pv2230w.npz"
    m.save(path, {"note": "x"})
    back = ForecastModel.load(path)
    h = np.random.default_rng(3).random((6, 2))
    np.testing.assert_array_equal(back.forecast(h), m.forecast(h))
    assert back.metadata["note"] == "x"
    store = ModelStore([tmp_path], include_bundled=False)
    assert store.path_for(2.23) == path
    with pytest.raises(MissingModelError, match="allow_training"):
        store.get(7.77)


def test_dataset_file_round_trip(tmp_path):
    p = tmp_path / "d.csv"
    write_dataset(p, [1.0, 2.0, 3.0], [0.0, 0.5, 0.25])
    np.testing.assert_array_equal(read_dataset(p), [[1.0, 0.0], [2.0, 0.5], [3.0, 0.25]])


def test_bundled_models_cover_published_peaks():
    from nanogrid_p2p.core import RpvClass
    from nanogrid_p2p.environment import PUBLISHED_PEAKS_KW

    store = ModelStore()
    for rpv in (RpvClass.RPV1, RpvClass.RPV2):
        for peak in PUBLISHED_PEAKS_KW[rpv]:
            assert store.path_for(peak) is not None, peak
