import numpy as np
import pytest
from numpy.testing import assert_allclose

from beliefkit.engine.dependence import (
    beta_hedge,
    cojump_moments,
    dejumped_correlation,
    estimate_pair,
    evaluate_rho,
    fit_rho_surface,
)
from beliefkit.models import DependenceConfig, PairDependence, PairState, SurfaceConfig

N = 6000
WINDOW = 300


def _paths(rho, seed, sigma=0.02):
    rng = np.random.default_rng(seed)
    z1 = rng.standard_normal(N)
    z2 = rho * z1 + np.sqrt(1.0 - rho**2) * rng.standard_normal(N)
    x_i = np.concatenate([[0.0], np.cumsum(sigma * z1)])
    x_j = np.concatenate([[0.0], np.cumsum(sigma * z2)])
    return x_i, x_j


def test_independent_drivers_are_uncorrelated():
    x_i, x_j = _paths(0.0, seed=1)
    zeros = np.zeros(N)
    rho = dejumped_correlation(x_i, x_j, zeros, zeros, window=WINDOW)
    assert np.isnan(rho[: WINDOW - 1]).all()
    assert abs(np.nanmean(rho)) < 3.0 / np.sqrt(WINDOW)


def test_common_driver_correlation_is_recovered():
    x_i, x_j = _paths(0.6, seed=2)
    zeros = np.zeros(N)
    rho = dejumped_correlation(x_i, x_j, zeros, zeros, window=WINDOW)
    assert 0.5 <= np.nanmean(rho) <= 0.7
    assert np.nanmax(np.abs(rho)) <= 1.0


def test_flagged_jumps_are_removed_from_the_correlation():
    x_i, x_j = _paths(0.0, seed=3)
    jumped_i, jumped_j = x_i.copy(), x_j.copy()
    jumped_i[3001:] += 1.0
    jumped_j[3001:] += 1.0
    gamma = np.zeros(N)
    unflagged = dejumped_correlation(jumped_i, jumped_j, gamma, gamma, window=WINDOW)
    gamma[3000] = 1.0
    flagged = dejumped_correlation(jumped_i, jumped_j, gamma, gamma, window=WINDOW)
    assert unflagged[3100] > 0.5
    assert abs(flagged[3100]) < 0.3


def test_short_windows_are_rejected():
    x_i, x_j = _paths(0.0, seed=4)
    with pytest.raises(ValueError):
        dejumped_correlation(x_i, x_j, np.zeros(N), np.zeros(N), window=30)


def test_cojump_intensity_counts_joint_flags():
    x_i, x_j = _paths(0.0, seed=5)
    steps = np.array([500, 1700, 2900, 4100, 5300, 5900])
    gamma_i = np.zeros(N)
    gamma_j = np.zeros(N)
    gamma_i[steps] = 1.0
    gamma_j[steps] = 1.0
    gamma_i[1000] = 1.0
    intensity, m2, n_joint = cojump_moments(x_i, x_j, gamma_i, gamma_j, dt=1.0)
    assert n_joint == steps.size
    assert intensity == pytest.approx(steps.size / N)
    dp_i = np.diff(1.0 / (1.0 + np.exp(-x_i)))
    dp_j = np.diff(1.0 / (1.0 + np.exp(-x_j)))
    assert m2 == pytest.approx(np.mean(dp_i[steps] * dp_j[steps]))


def test_lag_tolerance_matches_nearby_flags():
    x_i, x_j = _paths(0.0, seed=6)
    gamma_i = np.zeros(N)
    gamma_j = np.zeros(N)
    gamma_i[100] = 1.0
    gamma_j[102] = 1.0
    assert cojump_moments(x_i, x_j, gamma_i, gamma_j)[2] == 0
    assert cojump_moments(x_i, x_j, gamma_i, gamma_j, lag_tolerance=2)[2] == 1


def test_lag_matching_uses_each_flag_once():
    x_i, x_j = _paths(0.0, seed=6)
    gamma_i = np.zeros(N)
    gamma_j = np.zeros(N)
    gamma_i[[10, 12]] = 1.0
    gamma_j[11] = 1.0
    intensity, m2, n_joint = cojump_moments(x_i, x_j, gamma_i, gamma_j, lag_tolerance=1)
    assert n_joint == 1
    assert intensity == pytest.approx(1.0 / N)
    dp_i = np.diff(1.0 / (1.0 + np.exp(-x_i)))
    dp_j = np.diff(1.0 / (1.0 + np.exp(-x_j)))
    assert m2 == pytest.approx(dp_i[10] * dp_j[11])


@pytest.mark.parametrize("lag", [0, 1, 3])
def test_cojump_moments_are_symmetric_in_the_pair(lag):
    x_i, x_j = _paths(0.3, seed=11)
    rng = np.random.default_rng(12)
    gamma_i = (rng.random(N) < 0.02).astype(float)
    gamma_j = (rng.random(N) < 0.02).astype(float)
    gamma_i[[10, 12]] = 1.0
    gamma_j[[10, 12]] = 0.0
    gamma_j[11] = 1.0
    gamma_i[500] = gamma_j[500] = 1.0
    forward = cojump_moments(x_i, x_j, gamma_i, gamma_j, lag_tolerance=lag)
    swapped = cojump_moments(x_j, x_i, gamma_j, gamma_i, lag_tolerance=lag)
    assert forward[2] == swapped[2] > 0
    assert forward[0] == pytest.approx(swapped[0])
    assert forward[1] == pytest.approx(swapped[1], rel=1e-12)


def test_correlation_is_symmetric_in_the_pair():
    x_i, x_j = _paths(0.4, seed=13)
    rng = np.random.default_rng(14)
    gamma_i, gamma_j = rng.random(N), rng.random(N)
    forward = dejumped_correlation(x_i, x_j, gamma_i, gamma_j, window=WINDOW)
    swapped = dejumped_correlation(x_j, x_i, gamma_j, gamma_i, window=WINDOW)
    assert_allclose(forward, swapped, rtol=1e-12, equal_nan=True)


def test_correlation_ignores_the_scale_of_either_leg():
    x_i, x_j = _paths(0.5, seed=15, sigma=1e-4)
    zeros = np.zeros(N)
    rho = dejumped_correlation(x_i, x_j, zeros, zeros, window=WINDOW)
    scaled = dejumped_correlation(x_i, 3.0 * x_j, zeros, zeros, window=WINDOW)
    flipped = dejumped_correlation(x_i, -x_j, zeros, zeros, window=WINDOW)
    assert_allclose(scaled, rho, atol=1e-3, equal_nan=True)
    assert_allclose(flipped, -rho, atol=1e-12, equal_nan=True)


def test_hedge_ratio_at_even_odds_is_the_shrunk_correlation():
    hedge = beta_hedge(PairState(x_i=0.0, x_j=0.0, sigma_i=0.05, sigma_j=0.05, rho=0.6), alpha=0.7)
    assert hedge.beta == pytest.approx(0.6)
    assert hedge.beta_effective == pytest.approx(0.42)


def test_hedge_ratio_is_clamped():
    hedge = beta_hedge(PairState(x_i=0.0, x_j=8.0, sigma_i=0.05, sigma_j=0.05, rho=0.5), clamp_abs=10.0)
    assert hedge.beta > 10.0
    assert hedge.beta_effective == 10.0


def test_cojump_correction_is_added_after_shrinkage():
    cojump = PairDependence(t=[1.0], rho=[0.0], cojump_intensity=0.001, cojump_m2=0.01, window=300.0)
    state = PairState(x_i=0.0, x_j=0.0, sigma_i=0.05, sigma_j=0.05, rho=0.5)
    hedge = beta_hedge(state, alpha=0.7, cojump=cojump)
    expected = 0.01 * 0.001 / (0.25**2 * 0.05**2)
    assert hedge.jump_correction == pytest.approx(expected)
    assert hedge.beta_effective == pytest.approx(0.35 + expected)


def test_estimate_pair_layout():
    x_i, x_j = _paths(0.6, seed=7)
    series_i = {"x_hat": x_i, "gamma": np.zeros(N), "sigma_b2": np.full(N, 0.0004)}
    series_j = {"x_hat": x_j, "gamma": np.zeros(N), "sigma_b2": np.full(N, 0.0004)}
    result = estimate_pair("other", series_i, series_j, DependenceConfig(window=WINDOW))
    frame = result.dependence.to_frame()
    assert list(frame.columns) == ["t", "rho"]
    assert len(frame) == N
    assert result.hedge.beta_effective == pytest.approx(0.7 * result.hedge.beta)
    assert result.dependence.summary()["n_joint"] == 0


def test_rho_surface_is_signed_and_clamped():
    rng = np.random.default_rng(9)
    tau = rng.uniform(0.0, 600.0, 500)
    m = rng.uniform(-2.0, 2.0, 500)
    rho = -0.4 + 0.0 * tau + rng.normal(0.0, 0.02, 500)
    cfg = SurfaceConfig(n_tau_bins=6, n_m_bins=5, n_basis_tau=5, n_basis_m=4, n_bootstrap=0)
    layer = fit_rho_surface(tau, m, rho, cfg=cfg, alpha=1.0)
    assert layer.link == "identity"
    assert_allclose(evaluate_rho(layer, 300.0, 0.0), -0.4, atol=0.05)
