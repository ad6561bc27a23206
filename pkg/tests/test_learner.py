import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ridge_dense_inverse
from spinres.data import MG_SPLITS, make_splits, mg_generate, normalize_minmax
from spinres.errors import DivergenceError, SingularMatrixError, SizingError
from spinres.learner import (FeatureConfig, ForecastResult, ReadoutModel, build_features,
                             forecast_autonomous, gradient_descent_fit, predict_open_loop,
                             ridge_fit, ridge_solve, train_task)
from spinres.reservoir import Backend, StateMatrix, SurrogateBackend, SurrogateConfig, \
    surrogate_ensemble


class DelayLine(Backend):
    """Pure delay line: the state row is the current input."""

    devices, nodes = 1, 1

    def reset(self):
        pass

    def step(self, u):
        return np.array([float(u)])

    def describe(self):
        return {"backend": "delay-line"}


# --------------------------------------------------------------------------- features

def test_features_d0_is_identity():
    r = np.arange(12.0).reshape(4, 3)
    a, off = build_features(r, FeatureConfig(0))
    assert off == 0 and np.array_equal(a, r)


def test_features_shapes():
    a, off = build_features(np.zeros((400, 18)), FeatureConfig(30))
    assert a.shape == (370, 558) and off == 30
    r = np.arange(10.0).reshape(5, 2)
    a, _ = build_features(r, FeatureConfig(2))
    assert a.shape == (3, 6)
    # oldest first
    assert np.array_equal(a[0], np.concatenate([r[0], r[1], r[2]]))
    a, _ = build_features(r, FeatureConfig(2, include_bias=True))
    assert a.shape == (3, 7) and np.all(a[:, -1] == 1.0)
    with pytest.raises(SizingError):
        build_features(np.zeros((3, 2)), FeatureConfig(3))


def test_feature_window_locality():
    # a = b = 0: node states depend only on the current input
    cfg = surrogate_ensemble(2, SurrogateConfig(self_weight=0.0, neighbor_weight=0.0,
                                                activation="tanh"), bias_scale=0.3)
    rng = np.random.default_rng(0)
    u = rng.uniform(-1, 1, 40)
    d, n = 4, 30
    base, _ = build_features(SurrogateBackend(cfg).run(u), FeatureConfig(d))
    for k in range(d + 1):
        v = u.copy()
        v[n - k] += 0.5
        a, _ = build_features(SurrogateBackend(cfg).run(v), FeatureConfig(d))
        assert not np.array_equal(a[n - d], base[n - d]), k
    v = u.copy()
    v[n - d - 1] += 0.5
    a, _ = build_features(SurrogateBackend(cfg).run(v), FeatureConfig(d))
    assert np.array_equal(a[n - d], base[n - d])


# --------------------------------------------------------------------------- ridge

@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.sampled_from([0.0, 1e-6, 1e-3, 1.0]))
def test_ridge_matches_dense_inverse(seed, lam):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(20, 10))
    b = rng.normal(size=20)
    w = ridge_solve(a, b, lam)
    ref = ridge_dense_inverse(a, b, lam)
    assert np.linalg.norm(w - ref) <= 1e-8 * np.linalg.norm(ref)
    # normal equations
    g = a.T @ a + lam * np.eye(10)
    assert np.linalg.norm(g @ w - a.T @ b) <= 1e-8 * np.linalg.norm(a.T @ b)


def test_ridge_identity_design():
    b = np.array([3.0, -1.0, 2.5, 0.0])
    assert np.allclose(ridge_solve(np.eye(4), b, 0.0), b, rtol=0, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_shrinkage_monotone(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(30, 8))
    b = rng.normal(size=30)
    norms = [np.linalg.norm(ridge_solve(a, b, lam)) for lam in 10.0 ** np.arange(-8, 5)]
    assert all(y <= x * (1 + 1e-12) for x, y in zip(norms, norms[1:]))
    assert norms[-1] < 1e-2 * norms[0]


def test_singular_without_regularization():
    a = np.ones((10, 3))
    with pytest.raises(SingularMatrixError) as err:
        ridge_solve(a, np.ones(10), 0.0)
    assert err.value.condition > 1e12
    # any positive lambda fixes it
    ridge_solve(a, np.ones(10), 1e-6)


def test_ridge_fit_reports_training_mse():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(40, 5))
    w_true = rng.normal(size=5)
    model = ridge_fit(a, a @ w_true, 0.0)
    assert np.allclose(model.weights, w_true, atol=1e-10)
    assert model.train_mse < 1e-20


def test_gradient_descent_converges_to_ridge():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(50, 10))
    b = rng.normal(size=50)
    w_gd, iters = gradient_descent_fit(a, b, 1e-2)
    assert iters < 200000
    assert np.abs(w_gd - ridge_solve(a, b, 1e-2)).max() < 1e-4


# --------------------------------------------------------------------------- prediction

def test_open_loop_predictions():
    r = np.random.default_rng(1).normal(size=(12, 3))
    zero = ReadoutModel(np.zeros(6), 0.0, FeatureConfig(1), 3)
    assert np.array_equal(predict_open_loop(zero, r), np.zeros(11))
    # square full-rank system: exact interpolation
    a = np.random.default_rng(2).normal(size=(6, 6))
    t = np.random.default_rng(3).normal(size=6)
    model = ridge_fit(a, t, 0.0)
    assert np.abs(predict_open_loop(model, a) - t).max() < 1e-9
    with pytest.raises(SizingError):
        predict_open_loop(model, np.zeros((6, 5)))


def test_forecast_edge_cases():
    be = SurrogateBackend(SurrogateConfig())
    model = ReadoutModel(np.zeros(6 * 3), 0.0, FeatureConfig(2), 6)
    out = forecast_autonomous(model, be, np.zeros(5), 0)
    assert out.predictions.size == 0
    with pytest.raises(SizingError):
        forecast_autonomous(model, be, np.zeros(2), 3)
    bad = ReadoutModel(np.full(18, np.nan), 0.0, FeatureConfig(2), 6)
    with pytest.raises(DivergenceError) as err:
        forecast_autonomous(bad, be, np.zeros(5), 3)
    assert err.value.partial == []


def test_delay_line_closure():
    # period-5 sequence; the shift readout picks R_{n-4} = u_{n-4} = u_{n+1}
    period = np.array([0.1, -0.7, 0.4, 0.9, -0.2])
    series = np.tile(period, 8)
    d = 4
    w = np.zeros(d + 1)
    w[0] = 1.0
    model = ReadoutModel(w, 0.0, FeatureConfig(d), 1)
    out = forecast_autonomous(model, DelayLine(), series[:20], 15)
    assert np.array_equal(out.predictions, series[20:35])
    assert np.array_equal(out.feedback, series[20:34])


def test_constant_series_closure():
    u = np.full(200, 0.4)
    be = SurrogateBackend(surrogate_ensemble(3, SurrogateConfig(activation="tanh"),
                                             bias_scale=1.0))
    states = be.run(u[:150])
    a, off = build_features(states, FeatureConfig(5))
    rows = np.arange(100, 150 - 1)
    model = ridge_fit(a[rows - off], u[rows + 1], 1e-8, FeatureConfig(5), be.width)
    out = forecast_autonomous(model, be, u[:150], 30)
    assert np.abs(out.predictions - 0.4).max() < 1e-6


def test_model_json_and_forecast_csv(tmp_path):
    model = ReadoutModel(np.arange(7.0) / 3, 1e-8, FeatureConfig(2, True), 2,
                         {"vmin": 0.1, "vmax": 1.3}, "abc")
    path = tmp_path / "m.json"
    model.to_json(path)
    back = ReadoutModel.from_json(path)
    assert np.array_equal(back.weights, model.weights)
    assert back.feature_config == model.feature_config and back.normalization == model.normalization
    with pytest.raises(SizingError):
        ReadoutModel(np.zeros(5), 0.0, FeatureConfig(1), 3)
    fr = ForecastResult([0.5, 0.25], [0.5, 0.0], "autonomous", start_step=10)
    fr.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "step,prediction,target,error"
    assert lines[2] == "11,0.25,0.0,0.25"
    assert fr.rmse == pytest.approx(np.sqrt(0.25**2 / 2))


# --------------------------------------------------------------------------- task orchestration

def _mg_bundle():
    return make_splits(normalize_minmax(mg_generate()), *MG_SPLITS)


def _preset_backend(seed=0):
    return SurrogateBackend(surrogate_ensemble(3, SurrogateConfig(activation="tanh"), 0.1, 1.0,
                                               seed))


def test_train_task_mg_counts_and_accuracy():
    res = train_task(_mg_bundle(), _preset_backend(), FeatureConfig(30), 1e-8)
    assert res.open_loop.predictions.size == 370
    assert res.open_loop.start_step == 31
    assert res.autonomous.predictions.size == 30
    assert res.autonomous.start_step == 401
    assert res.model.width == 31 * 18
    assert res.open_loop.rmse < 1e-3
    assert res.autonomous.rmse <= 0.05


def test_train_task_warmup_suffix_matches_full_closely():
    full = train_task(_mg_bundle(), _preset_backend(), FeatureConfig(30), 1e-8)
    suffix = train_task(_mg_bundle(), _preset_backend(), FeatureConfig(30), 1e-8,
                        warmup="suffix")
    assert np.array_equal(full.model.weights, suffix.model.weights)
    assert suffix.autonomous.rmse < 0.1


def test_train_task_rejects_short_washout():
    with pytest.raises(SizingError):
        train_task(_mg_bundle(), _preset_backend(), FeatureConfig(31), 1e-8)


def test_backend_interchangeability():
    """The learner consumes any backend's rows through the same code path."""
    rows = np.random.default_rng(0).uniform(-1, 1, (50, 4))
    sm = StateMatrix(rows, np.zeros(50), 1, 4)
    a1, _ = build_features(sm, FeatureConfig(3))
    a2, _ = build_features(rows, FeatureConfig(3))
    assert np.array_equal(a1, a2)
