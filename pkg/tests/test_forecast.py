import numpy as np
import pytest

from aflow import datagen
from aflow.data_model import DataFormatError
from aflow.evaluation import smape
from aflow.forecast import (
    ArModel,
    ArnetModel,
    ForecastConfig,
    fit_ar,
    fit_arnet,
    forecast,
    predict_naive,
    predict_seasonal_naive,
    resolve_neighbor_values,
    run_model,
    split_series,
)
from aflow.persistence import extract_persistent_network

import _helpers


def test_naive_repeats_last_value():
    np.testing.assert_array_equal(predict_naive([3.0, 9.0, 4.0], 3), [4.0, 4.0, 4.0])
    with pytest.raises(DataFormatError, match="empty history"):
        predict_naive([], 2)


def test_seasonal_naive_cycles_last_season():
    hist = np.arange(1.0, 15.0)  # last week is 8..14
    np.testing.assert_array_equal(
        predict_seasonal_naive(hist, 7), [8, 9, 10, 11, 12, 13, 14]
    )
    np.testing.assert_array_equal(
        predict_seasonal_naive(hist, 10), [8, 9, 10, 11, 12, 13, 14, 8, 9, 10]
    )
    with pytest.raises(DataFormatError, match="shorter than the season"):
        predict_seasonal_naive([1.0, 2.0], 3, m_star=7)


def test_config_validation():
    with pytest.raises(DataFormatError, match="positive"):
        ForecastConfig(p=0)
    with pytest.raises(DataFormatError, match="training window"):
        ForecastConfig(p=7, train_days=7)
    with pytest.raises(DataFormatError, match="neighbor mode"):
        ForecastConfig(neighbor_mode="oracle")


def test_ar_recovers_planted_coefficients():
    # y[t] = 0.5 y[t-1] + 0.25 y[t-7], noiseless
    rng = np.random.default_rng(7)
    y = np.zeros(56)
    y[:7] = rng.uniform(50.0, 150.0, size=7)
    for t in range(7, 56):
        y[t] = 0.5 * y[t - 1] + 0.25 * y[t - 7]
    model = fit_ar("v", y)
    expected = np.array([0.5, 0, 0, 0, 0, 0, 0.25])
    assert np.max(np.abs(model.alpha - expected)) < 1e-6


def test_ar_matches_unregularized_least_squares():
    rng = np.random.default_rng(1)
    y = rng.uniform(10.0, 100.0, size=56)
    model = fit_ar("v", y)
    lags = np.column_stack([y[7 - tau : 56 - tau] for tau in range(1, 8)])
    reference, *_ = np.linalg.lstsq(lags, y[7:], rcond=None)
    assert np.max(np.abs(model.alpha - reference)) < 1e-6


def test_ar_constant_series_reproduces_itself():
    model = fit_ar("v", np.full(56, 80.0))
    assert forecast(model, np.full(56, 80.0), config=ForecastConfig(horizon=1))[0] == pytest.approx(80.0, abs=1e-6)


def test_ar_all_zero_series_gives_zero_coefficients():
    model = fit_ar("v", np.zeros(56))
    np.testing.assert_array_equal(model.alpha, np.zeros(7))


def test_ar_input_validation():
    with pytest.raises(DataFormatError, match="fewer than p\\+1 regression rows"):
        fit_ar("v", np.ones(14))
    fit_ar("v", np.arange(15.0))  # 8 rows is exactly enough
    with pytest.raises(DataFormatError, match="non-finite"):
        fit_ar("v", np.array([1.0, np.nan] + [1.0] * 54))


def test_arnet_recovers_single_neighbor_weight():
    rng = np.random.default_rng(3)
    nb = rng.uniform(100.0, 400.0, size=56)
    y = 0.5 * nb
    model = fit_arnet("v", y, {"u": nb})
    assert abs(model.beta["u"] - 0.5) < 1e-3
    assert np.all(model.alpha < 1e-3)
    assert np.all(model.alpha >= 0.0)


def test_arnet_respects_bounds():
    rng = np.random.default_rng(9)
    y = rng.uniform(0.0, 50.0, size=40)
    nb = rng.uniform(0.0, 50.0, size=40)
    model = fit_arnet("v", y, {"u": nb})
    assert np.all(model.alpha >= 0.0)
    assert 0.0 <= model.beta["u"] <= 1.0


def test_arnet_without_neighbors_matches_empty_beta_fit():
    rng = np.random.default_rng(11)
    y = rng.uniform(50.0, 150.0, size=56)
    alone = fit_arnet("v", y, {})
    with_zero = fit_arnet("v", y, {"u": np.zeros(56)})
    assert alone.beta == {}
    np.testing.assert_allclose(with_zero.alpha, alone.alpha, atol=1e-8)


def test_arnet_is_deterministic():
    rng = np.random.default_rng(13)
    y = rng.uniform(10.0, 200.0, size=56)
    nb = rng.uniform(10.0, 200.0, size=56)
    m1 = fit_arnet("v", y, {"u": nb})
    m2 = fit_arnet("v", y, {"u": nb})
    assert np.array_equal(m1.alpha, m2.alpha)
    assert m1.beta == m2.beta


def test_arnet_trace_never_increases():
    rng = np.random.default_rng(2)
    nb = rng.uniform(100.0, 300.0, size=56)
    y = 0.4 * nb + rng.normal(0.0, 5.0, size=56)
    _, trace = fit_arnet("v", np.clip(y, 0, None), {"u": nb}, return_trace=True)
    assert len(trace) >= 2
    assert np.all(np.diff(trace) <= 1e-9)


def test_arnet_gradient_matches_finite_differences():
    from aflow.forecast import _lag_matrix, _smape_objective

    rng = np.random.default_rng(21)
    y = rng.uniform(20.0, 120.0, size=30)
    nbv = rng.uniform(20.0, 120.0, size=30)
    lags, target = _lag_matrix(y, 7)
    nb = nbv[7:][:, None]
    fun = _smape_objective(lags, nb, target)
    x = np.concatenate([rng.uniform(0.05, 0.3, size=7), [0.4]])
    _, grad = fun(x)
    eps = 1e-7
    for k in range(x.size):
        step = np.zeros_like(x)
        step[k] = eps
        hi, _ = fun(x + step)
        lo, _ = fun(x - step)
        numeric = (hi - lo) / (2 * eps)
        assert abs(grad[k] - numeric) < 1e-4


def test_arnet_input_validation():
    with pytest.raises(DataFormatError, match="no regression rows"):
        fit_arnet("v", np.ones(7), {})
    with pytest.raises(DataFormatError, match="does not match the target length"):
        fit_arnet("v", np.ones(56), {"u": np.ones(40)})
    with pytest.raises(DataFormatError, match="non-finite"):
        fit_arnet("v", np.ones(56), {"u": np.full(56, np.inf)})


def test_forecast_recursion_feeds_predictions_back():
    model = ArModel("v", np.array([0.5]))
    preds = forecast(model, [8.0], config=ForecastConfig(p=1, train_days=2, horizon=3))
    np.testing.assert_allclose(preds, [4.0, 2.0, 1.0])


def test_forecast_lag_seven_echoes_last_week():
    alpha = np.zeros(7)
    alpha[6] = 1.0
    model = ArModel("v", alpha)
    hist = np.arange(1.0, 8.0)
    np.testing.assert_allclose(forecast(model, hist), [1, 2, 3, 4, 5, 6, 7])


def test_forecast_clamps_at_zero():
    model = ArModel("v", np.array([-1.0]))
    preds = forecast(model, [5.0], config=ForecastConfig(p=1, train_days=2, horizon=2))
    np.testing.assert_array_equal(preds, [0.0, 0.0])


def test_forecast_neighbor_terms_and_validation():
    model = ArnetModel("v", np.zeros(7), {"u": 1.0})
    hist = np.full(7, 9.0)
    cfg = ForecastConfig(horizon=3)
    preds = forecast(model, hist, {"u": [3.0, 4.0, 5.0]}, cfg)
    np.testing.assert_allclose(preds, [3.0, 4.0, 5.0])
    with pytest.raises(DataFormatError, match="neighbor values are required"):
        forecast(model, hist, None, cfg)
    with pytest.raises(DataFormatError, match="missing neighbor values for u"):
        forecast(model, hist, {"u": [1.0]}, cfg)
    with pytest.raises(DataFormatError, match="history shorter"):
        forecast(model, np.ones(3), {"u": [1.0, 1.0, 1.0]}, cfg)


def test_beta_zero_forecast_equals_plain_ar():
    rng = np.random.default_rng(31)
    hist = rng.uniform(50.0, 100.0, size=14)
    alpha = rng.uniform(0.0, 0.2, size=7)
    plain = forecast(ArModel("v", alpha), hist)
    netless = forecast(ArnetModel("v", alpha, {}), hist)
    np.testing.assert_array_equal(plain, netless)


def network_dataset(noise_seed=0):
    # one persistent source -> target pair plus an isolated video
    rng = np.random.default_rng(noise_seed)
    n_days = 63
    src = np.asarray(_helpers.seasonal_values(800.0, n_days), dtype=float)
    tgt = 0.5 * src + rng.normal(0.0, 10.0, size=n_days)
    views = {
        "u": src.astype(int).tolist(),
        "v": np.clip(tgt, 0, None).astype(int).tolist(),
        "w": [150] * n_days,
    }
    ds = _helpers.build_dataset(views=views, daily_edges=[("u", "v", 1)])
    persistent = extract_persistent_network(ds.network, ds)
    return ds, persistent


def test_split_series_boundaries():
    ds, _ = network_dataset()
    cfg = ForecastConfig()
    train, test = split_series(ds, "u", cfg)
    assert train.size == 56 and test.size == 7
    assert train[0] == ds.aligned_views("u")[0]
    assert test[-1] == ds.aligned_views("u")[-1]
    with pytest.raises(DataFormatError, match="cannot hold"):
        split_series(ds, "u", ForecastConfig(train_days=60, horizon=7))


def test_run_model_covers_all_four_families():
    ds, persistent = network_dataset()
    assert persistent.targets == frozenset({"v"})
    for name in ("naive", "snaive", "ar", "arnet"):
        models, result = run_model(ds, persistent, name)
        assert result.model_name == name
        assert result.video_ids == ("v",)
        assert result.y_true.shape == (1, 7)
        assert result.y_pred.shape == (1, 7)
        assert np.all(result.y_pred >= 0.0)
        if name in ("naive", "snaive"):
            assert models is None
        else:
            assert set(models) == {"v"}
    with pytest.raises(DataFormatError, match="unknown model"):
        run_model(ds, persistent, "arima")


def test_run_model_requires_targets():
    ds, _ = network_dataset()
    empty = extract_persistent_network(
        _helpers.build_dataset(views={"a": [200] * 63, "b": [200] * 63}).network,
        _helpers.build_dataset(views={"a": [200] * 63, "b": [200] * 63}),
    )
    with pytest.raises(DataFormatError, match="no targets"):
        run_model(ds, empty, "naive")


def test_snaive_zero_error_on_exactly_periodic_series():
    n_days = 63
    pattern = [100, 120, 90, 110, 130, 80, 105]
    views = {
        "u": [v * 4 for v in pattern] * 9,
        "v": pattern * 9,
    }
    ds = _helpers.build_dataset(views=views, daily_edges=[("u", "v", 1)])
    persistent = extract_persistent_network(ds.network, ds)
    _, result = run_model(ds, persistent, "snaive")
    assert smape(result.y_true[0], result.y_pred[0]) == 0.0


def test_thread_count_does_not_change_results():
    ds, persistent = network_dataset()
    _, serial = run_model(ds, persistent, "arnet", threads=1)
    _, pooled = run_model(ds, persistent, "arnet", threads=4)
    np.testing.assert_array_equal(serial.y_pred, pooled.y_pred)


def test_observed_mode_feeds_actual_neighbor_views():
    ds, _ = network_dataset()
    cfg = ForecastConfig()
    models = {"v": ArnetModel("v", np.zeros(7), {"u": 1.0})}
    values = resolve_neighbor_values(ds, models, cfg)
    _, test_u = split_series(ds, "u", cfg)
    np.testing.assert_array_equal(values["v"]["u"], test_u)


def test_forecast_mode_uses_snaive_for_unmodeled_neighbors():
    ds, _ = network_dataset()
    cfg = ForecastConfig(neighbor_mode="forecast")
    models = {"v": ArnetModel("v", np.zeros(7), {"u": 1.0})}
    values = resolve_neighbor_values(ds, models, cfg)
    train_u, _ = split_series(ds, "u", cfg)
    np.testing.assert_array_equal(
        values["v"]["u"], predict_seasonal_naive(train_u, cfg.horizon)
    )


def test_forecast_mode_chains_modeled_neighbors():
    n_days = 63
    views = {
        "a": [200] * n_days,
        "b": [100] * n_days,
        "c": [50] * n_days,
    }
    ds = _helpers.build_dataset(views=views)
    cfg = ForecastConfig(neighbor_mode="forecast")
    models = {
        "b": ArnetModel("b", np.zeros(7), {"a": 0.5}),
        "c": ArnetModel("c", np.zeros(7), {"b": 0.5}),
    }
    values = resolve_neighbor_values(ds, models, cfg)
    # b's forecast is 0.5 * snaive(a) = 100; c sees that forecast, not b's data
    np.testing.assert_allclose(values["c"]["b"], np.full(7, 100.0))
    np.testing.assert_allclose(values["b"]["a"], np.full(7, 200.0))


def test_datagen_recovery_two_neighbors():
    # a quarter-week phase gap keeps the two source sinusoids orthogonal;
    # anti-phase sources (gap 3.5) would sum to a constant and lose beta
    edges = ((0, 2, 0.6), (1, 2, 0.3))
    cfg = datagen.GenConfig(
        n_videos=3,
        n_artists=1,
        days=63,
        base_levels=(900.0, 900.0, 0.0),
        phases=(0.0, 1.75, 0.0),
        seasonal_amplitude=0.25,
        noise_scale=5.0,
        presence_prob=1.0,
        seed=3,
        alpha_profile=(0.2, 0, 0, 0, 0, 0, 0.2),
        edges=edges,
    )
    dataset, truth = datagen.generate(cfg)
    train = {v: split_series(dataset, v, ForecastConfig())[0] for v in dataset.corpus}
    model = fit_arnet(
        "v00002",
        train["v00002"],
        {"v00000": train["v00000"], "v00001": train["v00001"]},
    )
    assert abs(model.beta["v00000"] - 0.6) < 0.05
    assert abs(model.beta["v00001"] - 0.3) < 0.05
    true_alpha = np.array(truth.alpha["v00002"])
    # the lag-7 weight rides on a nearly periodic regressor, so it is the
    # loosest coordinate of the fit
    assert np.max(np.abs(model.alpha - true_alpha)) < 0.08
