import numpy as np
import pytest
from numpy.testing import assert_allclose

from beliefkit.engine.surface import (
    bin_estimates,
    bin_samples,
    build_surface,
    evaluate,
    evaluate_layer,
    fit_surface,
    news_windows_in_tau,
    penalty_root,
    roughness,
    surface_frame,
    uniform_knots,
)
from beliefkit.models import (
    CalibrationSlice,
    InsufficientDataError,
    OutOfHullError,
    RankDeficientFitError,
    SurfaceConfig,
    SurfaceGrid,
)


def _grid(fn, n_tau=8, n_m=6, tau_range=(0.0, 600.0), m_range=(-2.0, 2.0)):
    tau_edges = np.linspace(*tau_range, n_tau + 1)
    m_edges = np.linspace(*m_range, n_m + 1)
    tau_axis = 0.5 * (tau_edges[1:] + tau_edges[:-1])
    m_axis = 0.5 * (m_edges[1:] + m_edges[:-1])
    tau, m = np.meshgrid(tau_axis, m_axis, indexing="ij")
    return SurfaceGrid(
        layer="sigma_b",
        tau_axis=tau_axis,
        m_axis=m_axis,
        tau_edges=tau_edges,
        m_edges=m_edges,
        values=fn(tau, m),
        weights=np.ones(tau.shape),
        counts=np.ones(tau.shape),
    )


def test_bin_samples_weighted_cell_means():
    cfg = SurfaceConfig(n_tau_bins=2, n_m_bins=2)
    grid = bin_samples(
        tau=[0.0, 1.0, 3.0, 4.0],
        m=[-1.0, -1.0, 1.0, 1.0],
        values=[1.0, 3.0, 5.0, 7.0],
        weights=[1.0, 3.0, 1.0, 1.0],
        cfg=cfg,
    )
    assert_allclose(grid.tau_axis, [1.0, 3.0])
    assert grid.values[0, 0] == pytest.approx((1.0 + 9.0) / 4.0)
    assert grid.values[1, 1] == pytest.approx(6.0)
    assert grid.weights[0, 0] == pytest.approx(4.0)
    assert np.isnan(grid.values[0, 1])
    assert grid.counts.sum() == 4


def test_binned_step_in_tau_is_recovered():
    rng = np.random.default_rng(3)
    tau = np.concatenate([[0.0, 600.0], rng.uniform(0.0, 600.0, 4000)])
    m = rng.uniform(-2.0, 2.0, tau.size)
    truth = 0.05 + 0.05 * (tau < 300.0)
    values = truth + rng.normal(0.0, 0.005, tau.size)
    grid = bin_samples(tau, m, values, np.ones(tau.size), SurfaceConfig(n_tau_bins=12, n_m_bins=4))
    expected = np.where(grid.tau_axis < 300.0, 0.10, 0.05)[:, None]
    assert np.all(np.abs(grid.values - expected) < 0.1 * expected)


def test_linear_surface_is_reproduced_exactly():
    def linear(tau, m):
        return 4.0 + 0.01 * tau + 0.2 * m

    grid = _grid(linear)
    layer = fit_surface(grid, alpha=1.0, cfg=SurfaceConfig(n_basis_tau=6, n_basis_m=5, n_bootstrap=0))
    tau_mid = 0.5 * (grid.tau_axis[2] + grid.tau_axis[3])
    m = grid.m_axis[1]
    value = evaluate_layer(layer, tau_mid, m)
    assert_allclose(value, 0.5 * (grid.values[2, 1] + grid.values[3, 1]), atol=1e-7)
    assert_allclose(value, linear(tau_mid, m), atol=1e-7)


def test_smoothing_beats_raw_binning():
    rng = np.random.default_rng(8)

    def truth(tau, m):
        return 0.2 + 0.05 * np.sin(tau / 150.0) + 0.03 * m**2

    tau = np.concatenate([[0.0, 600.0], rng.uniform(0.0, 600.0, 800)])
    m = np.concatenate([[-2.0, 2.0], rng.uniform(-2.0, 2.0, 800)])
    values = truth(tau, m) + rng.normal(0.0, 0.08, tau.size)
    cfg = SurfaceConfig(n_tau_bins=10, n_m_bins=8, n_basis_tau=8, n_basis_m=6, n_bootstrap=0)
    grid = bin_samples(tau, m, values, np.ones(tau.size), cfg)
    layer = fit_surface(grid, cfg=cfg)
    centres_tau, centres_m = np.meshgrid(grid.tau_axis, grid.m_axis, indexing="ij")
    target = truth(centres_tau, centres_m)
    populated = grid.populated
    raw_error = np.mean((grid.values[populated] - target[populated]) ** 2)
    fitted = evaluate_layer(layer, centres_tau, centres_m)
    fitted_error = np.mean((fitted[populated] - target[populated]) ** 2)
    assert fitted_error < raw_error
    assert layer.alpha in cfg.alpha_grid


def _noisy_grid(seed):
    rng = np.random.default_rng(seed)
    tau = np.concatenate([[0.0, 600.0], rng.uniform(0.0, 600.0, 1500)])
    m = np.concatenate([[-2.0, 2.0], rng.uniform(-2.0, 2.0, 1500)])
    values = 0.3 + 0.1 * np.sin(tau / 80.0) * np.cos(m) + rng.normal(0.0, 0.05, tau.size)
    cfg = SurfaceConfig(n_tau_bins=12, n_m_bins=8, n_basis_tau=8, n_basis_m=6, n_bootstrap=0)
    return bin_samples(tau, m, values, np.ones(tau.size), cfg), cfg


@pytest.mark.parametrize("nonnegative", [False, True])
def test_heavier_penalty_gives_smoother_fits(nonnegative):
    grid, cfg = _noisy_grid(10)
    windows = [(200.0, 300.0)]
    alphas = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0]
    layers = [fit_surface(grid, alpha=a, news_windows=windows, cfg=cfg, nonnegative=nonnegative) for a in alphas]
    root = penalty_root(
        layers[0].tau_knots, layers[0].m_knots, windows, cfg.news_relax, grid.abs_m_quantile, cfg.edge_factor
    )
    penalties = np.array([roughness(layer, root) for layer in layers])
    assert np.all(np.diff(penalties) <= 1e-6 * penalties[:-1] + 1e-12)
    assert penalties[-1] < penalties[0]
    assert roughness(layers[-1]) < roughness(layers[0])


def test_bootstrap_bands_are_reproducible_per_seed():
    grid, cfg = _noisy_grid(11)
    cfg = cfg.model_copy(update={"n_bootstrap": 20, "bootstrap_seed": 5})
    first = fit_surface(grid, alpha=1.0, cfg=cfg)
    second = fit_surface(grid, alpha=1.0, cfg=cfg)
    np.testing.assert_array_equal(first.band, second.band)
    assert np.all(first.band > 0.0)
    reseeded = fit_surface(grid, alpha=1.0, cfg=cfg.model_copy(update={"bootstrap_seed": 6}))
    assert not np.array_equal(first.band, reseeded.band)


def test_nonnegative_layers_stay_nonnegative():
    def spiky(tau, m):
        return np.where((tau > 250.0) & (tau < 350.0), 1.0, 0.0) + 0.0 * m

    grid = _grid(spiky)
    layer = fit_surface(grid, alpha=0.01, cfg=SurfaceConfig(n_basis_tau=6, n_basis_m=5, n_bootstrap=0))
    assert np.all(layer.coefficients >= 0.0)
    tau, m = np.meshgrid(np.linspace(0.0, 600.0, 61), np.linspace(-2.0, 2.0, 21), indexing="ij")
    assert np.all(evaluate_layer(layer, tau, m) >= 0.0)


def test_query_outside_the_hull_is_refused():
    grid = _grid(lambda tau, m: 1.0 + 0.0 * tau + 0.0 * m)
    layer = fit_surface(grid, alpha=1.0, cfg=SurfaceConfig(n_basis_tau=6, n_basis_m=5, n_bootstrap=0))
    with pytest.raises(OutOfHullError):
        evaluate_layer(layer, 700.0, 0.0)
    with pytest.raises(OutOfHullError):
        evaluate_layer(layer, 100.0, -3.0)


def test_too_few_cells_without_penalty_is_rank_deficient():
    grid = _grid(lambda tau, m: 1.0 + 0.001 * tau + 0.0 * m, n_tau=4, n_m=4)
    with pytest.raises(RankDeficientFitError):
        fit_surface(grid, alpha=0.0, cfg=SurfaceConfig(n_basis_tau=6, n_basis_m=5, n_bootstrap=0))


def test_single_moneyness_column_falls_back_to_tau_only():
    tau = np.linspace(1.0, 600.0, 300)
    m = np.full(tau.size, 0.4)
    values = 0.05 + 0.0001 * tau
    cfg = SurfaceConfig(n_tau_bins=10, n_m_bins=4, n_basis_tau=6, n_basis_m=5, n_bootstrap=0)
    grid = bin_samples(tau, m, values, np.ones(tau.size), cfg)
    layer = fit_surface(grid, alpha=1.0, cfg=cfg)
    assert layer.one_dimensional
    assert_allclose(evaluate_layer(layer, 300.0, 0.4), 0.05 + 0.03, rtol=5e-3)


def test_news_windows_relax_the_tau_penalty():
    knots = uniform_knots(0.0, 600.0, 10)
    plain = penalty_root(knots, None)
    relaxed = penalty_root(knots, None, news_windows=[(250.0, 350.0)], news_relax=0.1)
    ratios = np.linalg.norm(relaxed, axis=1) / np.linalg.norm(plain, axis=1)
    assert np.any(np.isclose(ratios, np.sqrt(0.1)))
    assert np.any(np.isclose(ratios, 1.0))


def test_news_windows_in_tau():
    assert news_windows_in_tau([1800.0, 3300.0], 90.0, 6000.0) == [(4110.0, 4290.0), (2610.0, 2790.0)]


def _slice(n=1000, resolution_time=1000.0):
    t = np.arange(n, dtype=float)
    return CalibrationSlice(
        t=t,
        m=1.5 * np.sin(t / 100.0),
        precision=np.full(n, 10.0),
        sigma_b2=np.full(n, 0.0025),
        lam=np.full(n, 0.001),
        sJ2=np.full(n, 0.25),
        resolution_time=resolution_time,
    )


def test_build_surface_and_export():
    cfg = SurfaceConfig(n_tau_bins=8, n_m_bins=6, n_basis_tau=6, n_basis_m=5, n_bootstrap=5)
    surface = build_surface([_slice()], cfg, news_windows=[(400.0, 500.0)])
    point = evaluate(surface, 700.0, 0.0)
    assert point.sigma_b == pytest.approx(0.05, rel=0.1)
    assert point.lam == pytest.approx(0.001, rel=0.1)
    assert set(point.band) == {"sigma_b", "lambda", "sJ2"}
    frame = surface_frame(surface, n_tau=5, n_m=4)
    assert len(frame) == 20
    assert list(frame.columns) == ["tau", "m", "sigma_b", "sigma_b_band", "lambda", "lambda_band", "sJ2", "sJ2_band"]
    assert np.all(frame[["sigma_b", "lambda", "sJ2"]].to_numpy() >= 0.0)
    with pytest.raises(OutOfHullError):
        evaluate(surface, 5000.0, 0.0)


def test_binning_refuses_samples_past_resolution():
    cfg = SurfaceConfig()
    with pytest.raises(InsufficientDataError):
        bin_estimates([_slice(n=1001, resolution_time=1000.0)], "sigma_b", cfg)
