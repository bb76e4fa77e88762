import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from beliefkit.engine.filtering import (
    canonical_mid,
    fit_noise_model,
    kalman_filter_smoother,
    noise_variance,
    residual_diagnostics,
)
from beliefkit.engine.kernel import logit, simulate_path
from beliefkit.models import (
    DataQualityError,
    EmptySeriesError,
    FilterOutput,
    InsufficientDataError,
    KernelParams,
    UniformSeries,
)


def _ticks(rows):
    return pd.DataFrame(rows, columns=["ts_ms", "bid", "ask", "trade_px", "trade_sz", "flags"])


def test_canonical_mid_weights_trades_and_carries_quotes():
    frame = _ticks(
        [
            (0, 0.40, 0.42, 0.42, 2.0, ""),
            (500, 0.44, 0.45, 0.45, 1.0, ""),
            (1200, 0.50, 0.52, np.nan, np.nan, ""),
            (1700, 0.52, 0.54, np.nan, np.nan, ""),
            (3100, 0.60, 0.62, np.nan, np.nan, ""),
        ]
    )
    series = canonical_mid(frame, bin_seconds=1.0, tick=0.001)
    w1 = 2.0 / (1.0 + (0.42 - 0.40) / 0.001)
    w2 = 1.0 / (1.0 + (0.45 - 0.44) / 0.001)
    expected_first = (w1 * 0.5 * (0.40 + 0.42) + w2 * 0.5 * (0.44 + 0.45)) / (w1 + w2)
    assert len(series) == 4
    assert_allclose(series.p_tilde, [expected_first, 0.53, 0.53, 0.61])
    assert_allclose(series.y, logit(series.p_tilde))
    assert_allclose(series.trade_rate, [2.0, 0.0, 0.0, 0.0])
    assert series.imbalance[0] == pytest.approx(1.0)
    assert not series.halted.any()


def test_halted_and_crossed_ticks_are_dropped():
    frame = _ticks(
        [
            (0, 0.30, 0.32, np.nan, np.nan, ""),
            (1000, 0.50, 0.52, np.nan, np.nan, "halt"),
            (1500, 0.60, 0.55, np.nan, np.nan, ""),
            (2000, 0.34, 0.36, np.nan, np.nan, ""),
        ]
    )
    series = canonical_mid(frame)
    assert_allclose(series.p_tilde, [0.31, 0.31, 0.35])
    assert series.halted.tolist() == [False, True, False]


def test_canonical_mid_clamps_probabilities():
    frame = _ticks([(0, 0.0, 0.0, np.nan, np.nan, ""), (1000, 1.0, 1.0, np.nan, np.nan, "")])
    series = canonical_mid(frame, eps=1e-5)
    assert_allclose(series.p_tilde, [1e-5, 1.0 - 1e-5])
    assert np.all(np.isfinite(series.y))


def test_canonical_mid_rejects_bad_input():
    with pytest.raises(EmptySeriesError):
        canonical_mid(_ticks([]))
    with pytest.raises(DataQualityError):
        canonical_mid(_ticks([(1000, 0.4, 0.5, np.nan, np.nan, ""), (0, 0.4, 0.5, np.nan, np.nan, "")]))
    with pytest.raises(DataQualityError):
        canonical_mid(_ticks([(0, 0.4, 0.5, np.nan, np.nan, "halt")]))


def test_noise_model_recovers_regime_variances():
    rng = np.random.default_rng(4)
    n = 12000
    regime = (np.arange(n) // 500) % 2
    spread = np.where(regime == 0, 0.02, 0.05)
    variances = np.array([0.03**2, 0.09**2])
    x = np.cumsum(rng.normal(0.0, 0.002, n))
    y = x + rng.normal(0.0, np.sqrt(variances[regime]))
    coeffs = fit_noise_model(UniformSeries.from_logit(y, spread=spread))
    for s, v in zip((0.02, 0.05), variances):
        predicted = noise_variance(np.array([[s**2, 0.0, 0.0, 0.0]]), coeffs)[0]
        assert abs(predicted - v) < 0.2 * v


def test_filter_with_no_process_noise_is_a_running_mean():
    y = np.array([0.3, -0.1, 0.4, 0.2, 0.0])
    out = kalman_filter_smoother(y, 0.5, proc_var=np.zeros(4))
    assert_allclose(out.x_filter, np.cumsum(y) / np.arange(1, 6))
    assert_allclose(out.var_filter, 0.5 / np.arange(1, 6))
    assert_allclose(out.x_hat, np.full(5, y.mean()))
    assert out.innovations.size == 4


def test_filter_beats_raw_observations():
    params = KernelParams.constant(0.05, 0.002)
    path = simulate_path(params, 0.45, 3000, seed=8)
    rng = np.random.default_rng(9)
    sd = np.where(np.arange(path.x.size) % 1000 < 500, 0.03, 0.09)
    y = path.x + rng.normal(0.0, sd)
    out = kalman_filter_smoother(y, sd**2)
    rmse_filtered = np.sqrt(np.mean((out.x_hat - path.x) ** 2))
    rmse_observed = np.sqrt(np.mean((y - path.x) ** 2))
    assert rmse_filtered < rmse_observed


def test_halted_steps_freeze_the_state():
    y = np.array([0.0, 0.1, 5.0, 5.0, 0.2, 0.25])
    halted = np.array([False, False, True, True, False, False])
    out = kalman_filter_smoother(y, 0.01, proc_var=np.full(5, 0.01), halted=halted)
    assert out.x_filter[2] == out.x_filter[1] == out.x_filter[3]
    assert np.isnan(out.innovations[1]) and np.isnan(out.innovations[2])
    assert np.isfinite(out.innovations[3])


def test_filter_rejects_bad_measurement_variance():
    with pytest.raises(DataQualityError):
        kalman_filter_smoother(np.zeros(5), np.array([0.1, 0.1, 0.0, 0.1, 0.1]))
    with pytest.raises(EmptySeriesError):
        kalman_filter_smoother(np.zeros(0), 0.1)


def _textbook_rts(y, R, Q, drift):
    n = y.size
    m, P = np.empty(n), np.empty(n)
    m_minus, P_minus = np.empty(n), np.empty(n)
    m[0] = m_minus[0] = y[0]
    P[0] = P_minus[0] = R[0]
    for k in range(1, n):
        m_minus[k] = m[k - 1] + drift[k - 1]
        P_minus[k] = P[k - 1] + Q[k - 1]
        K = P_minus[k] / (P_minus[k] + R[k])
        m[k] = m_minus[k] + K * (y[k] - m_minus[k])
        P[k] = (1.0 - K) * P_minus[k]
    ms, Ps = m.copy(), P.copy()
    for k in range(n - 2, -1, -1):
        G = P[k] / P_minus[k + 1]
        ms[k] = m[k] + G * (ms[k + 1] - m_minus[k + 1])
        Ps[k] = P[k] + G**2 * (Ps[k + 1] - P_minus[k + 1])
    return m, P, ms, Ps


def test_smoother_matches_the_textbook_recursions():
    rng = np.random.default_rng(17)
    n = 400
    R = rng.uniform(0.0005, 0.01, n)
    Q = rng.uniform(0.001, 0.004, n - 1)
    drift = rng.normal(0.0, 0.01, n - 1)
    y = np.cumsum(rng.normal(0.0, 0.05, n)) + rng.normal(0.0, np.sqrt(R))
    out = kalman_filter_smoother(y, R, drift=drift, proc_var=Q)
    m, P, ms, Ps = _textbook_rts(y, R, Q, drift)
    assert_allclose(out.x_filter, m, rtol=1e-8, atol=1e-12)
    assert_allclose(out.var_filter, P, rtol=1e-8, atol=1e-14)
    assert_allclose(out.x_hat, ms, rtol=1e-8, atol=1e-12)
    assert_allclose(out.var_hat, Ps, rtol=1e-8, atol=1e-14)


def test_smoothing_never_adds_uncertainty():
    rng = np.random.default_rng(18)
    y = np.cumsum(rng.normal(0.0, 0.05, 500)) + rng.normal(0.0, 0.03, 500)
    out = kalman_filter_smoother(y, 0.03**2)
    assert np.all(out.var_hat <= out.var_filter * (1.0 + 1e-12))
    assert out.var_hat[-1] == out.var_filter[-1]


def test_more_precise_quotes_give_tighter_estimates():
    rng = np.random.default_rng(19)
    y = np.cumsum(rng.normal(0.0, 0.05, 300))
    Q = np.full(299, 0.0025)
    coarse = kalman_filter_smoother(y, 0.01, proc_var=Q)
    fine = kalman_filter_smoother(y, 0.0025, proc_var=Q)
    assert np.all(fine.var_filter < coarse.var_filter)
    assert np.all(fine.var_hat < coarse.var_hat)
    # Constant noise levels: the filter variance settles monotonically.
    assert np.all(np.diff(coarse.var_filter) <= 1e-15)


def _output_with(innovations):
    n = innovations.size + 1
    zeros = np.zeros(n)
    return FilterOutput(
        x_hat=zeros,
        var_hat=zeros,
        x_filter=zeros,
        var_filter=zeros,
        innovations=innovations,
        innovation_var=np.ones(n - 1),
        loglik=0.0,
        y=zeros,
        meas_var=np.ones(n),
        proc_var=np.ones(n - 1),
        halted=np.zeros(n, dtype=bool),
    )


def test_white_innovations_look_white():
    z = np.random.default_rng(21).standard_normal(2000)
    report = residual_diagnostics(_output_with(z))
    assert report.n == 2000
    assert report.ljung_box_pvalue[10] > 1e-3
    assert 0.9 < report.variance_ratio < 1.1
    assert abs(report.excess_kurtosis) < 0.5


def test_correlated_innovations_fail_ljung_box():
    rng = np.random.default_rng(22)
    e = rng.standard_normal(2000)
    z = np.empty_like(e)
    z[0] = e[0]
    for u in range(1, e.size):
        z[u] = 0.5 * z[u - 1] + e[u]
    report = residual_diagnostics(_output_with(z))
    assert not report.ljung_box_pass
    assert not report.passed


def test_diagnostics_need_enough_innovations():
    with pytest.raises(InsufficientDataError):
        residual_diagnostics(_output_with(np.ones(20)))


def test_constant_innovations_are_flagged_degenerate():
    report = residual_diagnostics(_output_with(np.ones(200)))
    assert report.degenerate_variance
    assert not report.passed
