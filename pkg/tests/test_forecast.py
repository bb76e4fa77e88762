import numpy as np
import pytest

from beliefkit.engine.baselines import GarchFit, ar_garch, fit_jacobi, rw_logit, wf_jacobi
from beliefkit.engine.forecast import (
    MODEL_IDS,
    build_records,
    evaluate,
    forward_sum,
    qlike_terms,
    realized_variance,
    regime_labels,
    rn_jd_components,
    rn_jd_forecast,
    run_bench,
    schedule_kernel,
    tune_cj,
)
from beliefkit.engine.scenario import intensity_schedule, noise_regime, simulate_scenario
from beliefkit.models import (
    EmptySeriesError,
    ForecastTask,
    InsufficientDataError,
    JumpLaw,
    MixtureEstimates,
    Regime,
    RunConfig,
    ScenarioConfig,
    ScheduleWindow,
)


def _constant_estimates(n, sigma_b2=0.0025, lam=0.001, sJ2=0.25):
    return MixtureEstimates(
        sigma_b2=np.full(n, sigma_b2),
        lam=np.full(n, lam),
        sJ2=np.full(n, sJ2),
        law_index=np.zeros(n, dtype=int),
        window_starts=[0],
        window_ends=[n],
        window_sigma_b2=np.array([sigma_b2]),
        window_lam=np.array([lam]),
        window_sJ2=np.array([sJ2]),
        jump_laws=[JumpLaw.gaussian(np.sqrt(sJ2))],
    )


def test_forward_sum_matches_loop(rng):
    a = rng.random(6000)
    h = 60
    out = forward_sum(a, h)
    assert out.size == 6000 - 60
    expected = np.array([a[t + 1 : t + h + 1].sum() for t in range(a.size - h)])
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def test_forward_sum_needs_enough_points():
    with pytest.raises(InsufficientDataError):
        forward_sum(np.ones(5), 5)


def test_realized_variance_of_a_linear_path():
    x = 0.1 * np.arange(100)
    rv = realized_variance(x, 10)
    np.testing.assert_allclose(rv, 10 * 0.01)


def test_qlike_is_zero_for_a_perfect_forecast():
    rv = np.array([0.1, 0.5, 2.0])
    np.testing.assert_allclose(qlike_terms(rv, rv), 0.0, atol=1e-15)


@pytest.mark.parametrize("ratio, expected", [(0.5, 0.1931), (2.0, 0.3069)])
def test_qlike_is_asymmetric(ratio, expected):
    value = qlike_terms(np.array([ratio]), np.array([1.0]))[0]
    assert value == pytest.approx(expected, abs=1e-4)


def test_qlike_floors_zero_inputs():
    assert np.all(np.isfinite(qlike_terms(np.array([0.0]), np.array([0.0]))))


def test_constant_estimates_give_closed_form_forecast():
    task = ForecastTask(h=60, n=1000)
    base, jump = rn_jd_components(_constant_estimates(task.n_decisions), task)
    np.testing.assert_allclose(base, 60 * 0.0025)
    np.testing.assert_allclose(jump, 0.25 * 60 * 0.001)


def test_forecast_weights_the_jump_part():
    task = ForecastTask(h=60, n=1000)
    forecast = rn_jd_forecast(_constant_estimates(task.n_decisions), task, c_J=0.4)
    np.testing.assert_allclose(forecast, 60 * 0.0025 + 0.4 * 0.25 * 60 * 0.001)


def test_schedule_boost_is_capped():
    schedule = [ScheduleWindow(center=500.0, width=30.0)]
    task = ForecastTask(h=60, n=1000, schedule=schedule)
    _, jump = rn_jd_components(_constant_estimates(task.n_decisions), task)
    quiet = 0.25 * 60 * 0.001
    assert jump[470] > jump[100] == pytest.approx(quiet)
    assert np.all(jump <= 2 * quiet + 1e-12)


def test_schedule_kernel_has_unit_mass():
    t = np.arange(0.0, 2000.0)
    boost = schedule_kernel(t, [ScheduleWindow(center=1000.0, width=50.0)])
    assert boost.sum() == pytest.approx(1.0, rel=1e-6)


def test_estimates_shorter_than_task_raise():
    task = ForecastTask(h=10, n=100)
    with pytest.raises(InsufficientDataError):
        rn_jd_components(_constant_estimates(50), task)


def test_tune_cj_picks_the_matching_weight():
    base = np.full(50, 0.1)
    jump = np.full(50, 0.1)
    rv = np.full(50, 0.15)
    assert tune_cj(base, jump, rv, [0.3, 0.4, 0.5, 0.6]) == 0.5


def test_tune_cj_breaks_ties_towards_the_smaller_weight():
    base = np.full(10, 0.1)
    assert tune_cj(base, np.zeros(10), base, [0.9, 0.3, 0.6]) == 0.3


def test_tune_cj_without_forecasts_raises():
    with pytest.raises(InsufficientDataError):
        tune_cj(np.full(5, np.nan), np.zeros(5), np.ones(5), [0.5])


def test_regime_labels():
    t = np.array([0.0, 100.0, 950.0, 1000.0, 2000.0])
    labels = regime_labels(t, [ScheduleWindow(center=1000.0)], half_width=90.0, jump_times=np.array([0.0]))
    assert labels == [
        Regime.JUMP_WINDOW,
        Regime.QUIET,
        Regime.JUMP_WINDOW,
        Regime.JUMP_WINDOW,
        Regime.QUIET,
    ]


def test_evaluate_splits_by_regime():
    t = np.arange(4, dtype=float)
    rv = np.array([1.0, 1.0, 2.0, 2.0])
    records = build_records(
        "m", t, np.array([1.0, 1.0, 1.0, np.nan]), rv, [Regime.QUIET, Regime.QUIET, Regime.JUMP_WINDOW, Regime.JUMP_WINDOW]
    )
    report = evaluate(records)
    assert records.skipped == 1
    assert report.n == 3
    assert report.by_regime["quiet"].qlike == pytest.approx(0.0, abs=1e-12)
    assert report.by_regime["jump-window"].n == 1
    assert report.qlike == pytest.approx((2.0 - np.log(2.0) - 1.0) / 3)


def test_evaluate_without_forecasts_raises():
    records = build_records("m", np.zeros(2), np.full(2, np.nan), np.ones(2), [Regime.QUIET] * 2)
    with pytest.raises(EmptySeriesError):
        evaluate(records)


def test_random_walk_baseline(rng):
    x = np.cumsum(rng.normal(0.0, 0.05, 3000))
    task = ForecastTask(h=20, n=x.size)
    forecast = rw_logit(x[:1000], task)
    assert forecast.shape == (task.n_decisions,)
    assert forecast[0] == pytest.approx(20 * 0.0025, rel=0.2)


def test_jacobi_fit_is_admissible(rng):
    x = np.cumsum(rng.normal(0.0, 0.05, 2000))
    fit = fit_jacobi(x)
    assert fit["kappa"] >= 0.0
    assert 0.0 <= fit["theta"] <= 1.0
    assert fit["alpha"] > 0.0


@pytest.mark.parametrize("model", ["jacobi", "garch"])
def test_baselines_only_read_the_past(rng, model):
    x = np.cumsum(rng.normal(0.0, 0.05, 900))
    task = ForecastTask(h=20, n=x.size)
    cut = 500
    mutated = x.copy()
    mutated[cut + 1 :] += rng.normal(0.0, 1.0, x.size - cut - 1)
    fit = GarchFit(const=0.0, phi=0.1, omega=0.01, alpha=0.05, beta=0.9)
    if model == "jacobi":
        original, altered = wf_jacobi(x, x[:300], task), wf_jacobi(mutated, x[:300], task)
    else:
        original, altered = ar_garch(x, x[:300], task, fit=fit), ar_garch(mutated, x[:300], task, fit=fit)
    np.testing.assert_array_equal(original[: cut + 1], altered[: cut + 1])
    assert not np.array_equal(original, altered)


def test_scenario_is_deterministic_per_seed():
    cfg = ScenarioConfig(n_steps=500, schedule=[ScheduleWindow(center=250.0, width=30.0)], terminal_window=50.0)
    first, second = simulate_scenario(cfg, 3), simulate_scenario(cfg, 3)
    np.testing.assert_array_equal(first.y, second.y)
    np.testing.assert_array_equal(first.path.x, second.path.x)
    assert not np.array_equal(first.y, simulate_scenario(cfg, 4).y)
    assert first.path.x.size == 500
    assert len(first.ticks) == 500


def test_zero_noise_observes_the_truth():
    cfg = ScenarioConfig(n_steps=300, schedule=[], terminal_drift=False, zero_noise=True)
    scenario = simulate_scenario(cfg, 1)
    np.testing.assert_array_equal(scenario.y, scenario.path.x)


def test_terminal_drift_pushes_towards_resolution():
    cfg = ScenarioConfig(n_steps=1000, schedule=[], terminal_window=300.0)
    scenario = simulate_scenario(cfg, 2)
    assert abs(scenario.path.x[-1]) > abs(scenario.path.x[699])


def test_intensity_schedule_and_noise_regimes():
    t = np.arange(0.0, 3000.0)
    mult = intensity_schedule(t, [ScheduleWindow(center=1500.0, width=90.0)], 8.9)
    assert mult[1500] == pytest.approx(9.9)
    assert mult[0] == pytest.approx(1.0)
    regime = noise_regime(t, 1000.0)
    assert regime[0] == 0 and regime[1500] == 1 and regime[2500] == 0


def test_run_bench_scores_every_model(small_config):
    cfg = RunConfig(**small_config)
    result, records = run_bench(cfg, seed=3)
    assert [report.model for report in result.reports] == list(MODEL_IDS)
    assert result.c_J in cfg.bench.cj_grid
    assert set(records) == set(MODEL_IDS)
    n_decisions = cfg.scenario.n_steps - cfg.bench.h
    assert result.n_test == n_decisions - 2 * (n_decisions // 3)
    assert all(report.qlike >= 0 for report in result.reports)
    assert [report.model for report in result.full_sample] == list(MODEL_IDS)
    assert result.n_full == n_decisions
    assert result.report("RN-JD", full=True).n >= result.report("RN-JD").n

    again, _ = run_bench(cfg, seed=3)
    assert [report.qlike for report in again.reports] == [report.qlike for report in result.reports]


def test_jump_diffusion_forecast_only_reads_the_past(small_config):
    cfg = RunConfig(**small_config)
    scenario = simulate_scenario(cfg.scenario, 3)
    cut = 450
    mutated = scenario.y.copy()
    mutated[cut + 1 :] += np.random.default_rng(5).normal(0.0, 0.5, mutated.size - cut - 1)
    original, records = run_bench(cfg, seed=3, scenario=scenario)
    altered, mutated_records = run_bench(cfg, seed=3, scenario=scenario._replace(y=mutated))
    assert original.c_J == altered.c_J
    before, after = records["RN-JD"].v_hat, mutated_records["RN-JD"].v_hat
    np.testing.assert_array_equal(before[: cut + 1], after[: cut + 1])
    assert not np.array_equal(before, after)
