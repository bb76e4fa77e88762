"""The forecast module implements the causal h-step logit-variance forecasting task and its metrics."""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import mean_absolute_error, mean_squared_error

from ..config import logger, settings
from ..models import (
    BenchConfig,
    BenchResult,
    EmptySeriesError,
    ForecastRecords,
    ForecastTask,
    InsufficientDataError,
    MetricReport,
    MixtureEstimates,
    Regime,
    RegimeMetrics,
    RunConfig,
    ScheduleWindow,
)
from ..utils import ewma, parallel_map
from .baselines import ar_garch, const_sigma_logit, rw_logit, wf_jacobi
from .em import calibrate
from .filtering import kalman_filter_smoother
from .scenario import Scenario, simulate_scenario

VARIANCE_FLOOR = 1e-12
MODEL_IDS = ("RN-JD", "RW-logit", "Logit-const", "WF-Jacobi", "AR1-GARCH")


def forward_sum(a: np.ndarray, h: int) -> np.ndarray:
    """out[t] = a[t+1] + ... + a[t+h] for t = 0 .. N-h-1.

    Raises:
        InsufficientDataError: The series has fewer than h + 1 points.
    """
    a = np.asarray(a, dtype=float)
    if h < 1:
        raise ValueError(f"h must be at least 1, got {h}")
    if a.size < h + 1:
        raise InsufficientDataError("Forward sum", a.size, h + 1)
    return np.lib.stride_tricks.sliding_window_view(a[1:], h).sum(axis=1)


def realized_variance(x_hat: np.ndarray, h: int) -> np.ndarray:
    """Forward h-step realised variance of the filtered logit, sum of (dx)^2 over (t, t+h]."""
    x_hat = np.asarray(x_hat, dtype=float)
    squared = np.concatenate([[0.0], np.diff(x_hat) ** 2])
    return forward_sum(squared, h)


def schedule_kernel(t: np.ndarray, schedule: Sequence[ScheduleWindow], jumps_per_window: float = 1.0) -> np.ndarray:
    """Extra jump intensity (1/s) from announced windows, a Gaussian bump of unit mass per window."""
    t = np.asarray(t, dtype=float)
    boost = np.zeros_like(t)
    for window in schedule:
        z = (t - window.center) / window.width
        boost += jumps_per_window * np.exp(-0.5 * z * z) / (window.width * np.sqrt(2.0 * np.pi))
    return boost


def _held(values: np.ndarray, half_life: float, dt: float) -> np.ndarray:
    """EWMA of a calibration stream, NaN until the stream has produced a value."""
    values = np.asarray(values, dtype=float)
    held = ewma(values, half_life, dt)
    seen = np.cumsum(np.isfinite(values)) > 0
    return np.where(seen, held, np.nan)


def rn_jd_components(
    est: MixtureEstimates,
    task: ForecastTask,
    cfg: Optional[BenchConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Diffusive and jump parts of the jump-diffusion forecast; v_hat = base + c_J * jump.

    At decision time t the (sigma_b2, lambda, sJ2) streams are held flat at their EWMA
    values as of t. The jump part is sJ2(t) times the forward sum of lambda(t) plus the
    schedule boost, where the boost is capped at the running quantile of the smoothed
    intensity history.

    Args:
        est: Causal estimates per increment; increment t uses data up to grid point t.
        task: Forecasting task.
        cfg: Bench settings.

    Returns:
        Tuple of (base, jump) arrays, one value per decision time, NaN without calibration.
    """
    cfg = cfg or BenchConfig()
    n_dec = task.n_decisions
    if len(est) < n_dec:
        raise InsufficientDataError("Calibration stream", len(est), n_dec)
    h, dt = task.h, task.dt
    sigma2 = _held(est.sigma_b2[:n_dec], cfg.hold_half_life, dt)
    lam = _held(est.lam[:n_dec], cfg.hold_half_life, dt)
    sJ2 = _held(est.sJ2[:n_dec], cfg.hold_half_life, dt)
    cap = pd.Series(lam).expanding().quantile(cfg.cap_quantile).to_numpy()

    grid_t = np.arange(task.n) * dt
    boost = schedule_kernel(grid_t, task.schedule, cfg.jumps_per_window)
    future = np.lib.stride_tricks.sliding_window_view(boost[1:], h)[:n_dec]
    capped = np.minimum(future, np.nan_to_num(cap)[:, None]).sum(axis=1)

    base = h * dt * sigma2
    jump = sJ2 * (h * lam + capped) * dt
    return base, jump


def rn_jd_forecast(
    est: MixtureEstimates,
    task: ForecastTask,
    c_J: float,
    cfg: Optional[BenchConfig] = None,
) -> np.ndarray:
    """Jump-diffusion forecast of the forward h-step logit variance."""
    base, jump = rn_jd_components(est, task, cfg)
    return base + c_J * jump


def qlike_terms(rv: np.ndarray, v_hat: np.ndarray) -> np.ndarray:
    """r / v - log(r / v) - 1 with both floored at 1e-12."""
    ratio = np.maximum(rv, VARIANCE_FLOOR) / np.maximum(v_hat, VARIANCE_FLOOR)
    return np.maximum(ratio - np.log(ratio) - 1.0, 0.0)


def _losses(rv: np.ndarray, v_hat: np.ndarray) -> RegimeMetrics:
    log_error = np.log(np.maximum(rv, VARIANCE_FLOOR)) - np.log(np.maximum(v_hat, VARIANCE_FLOOR))
    return RegimeMetrics(
        n=int(rv.size),
        mse=float(mean_squared_error(rv, v_hat)),
        mae=float(mean_absolute_error(rv, v_hat)),
        log_mse=float(np.mean(log_error**2)),
        qlike=float(np.mean(qlike_terms(rv, v_hat))),
    )


def evaluate(records: ForecastRecords) -> MetricReport:
    """Losses of one model over its records, overall and per regime.

    Raises:
        EmptySeriesError: No record carries a forecast.
    """
    usable = np.isfinite(records.v_hat)
    if not np.any(usable):
        raise EmptySeriesError(f"forecast records of {records.model}")
    rv, v_hat = records.rv[usable], records.v_hat[usable]
    overall = _losses(rv, v_hat)
    regimes = np.array([regime.value for regime in records.regime])[usable]
    by_regime = {
        regime.value: _losses(rv[regimes == regime.value], v_hat[regimes == regime.value])
        for regime in Regime
        if np.any(regimes == regime.value)
    }
    return MetricReport(model=records.model, **overall.model_dump(), by_regime=by_regime)


def tune_cj(
    base: np.ndarray,
    jump: np.ndarray,
    rv: np.ndarray,
    grid: Sequence[float],
    tie_tolerance: float = 1e-9,
) -> float:
    """Jump weight with the lowest validation QLIKE; near-ties go to the smaller weight.

    Raises:
        InsufficientDataError: No validation record has a finite forecast.
    """
    usable = np.isfinite(base) & np.isfinite(jump) & np.isfinite(rv)
    if not np.any(usable):
        raise InsufficientDataError("Validation slice", 0, 1)
    scores = [float(np.mean(qlike_terms(rv[usable], base[usable] + c * jump[usable]))) for c in sorted(grid)]
    best = min(scores)
    for c, score in zip(sorted(grid), scores):
        if score <= best + tie_tolerance * max(abs(best), 1.0):
            logger.info("Tuned c_J=%.2f with validation QLIKE %.4f.", c, score)
            return float(c)
    return float(sorted(grid)[0])


def regime_labels(
    t: np.ndarray,
    schedule: Sequence[ScheduleWindow],
    half_width: float = 90.0,
    jump_times: Optional[np.ndarray] = None,
) -> List[Regime]:
    """Jump-window when within half_width of a schedule centre or a flagged jump, else quiet."""
    t = np.asarray(t, dtype=float)
    near = np.zeros(t.size, dtype=bool)
    centres = [window.center for window in schedule]
    if jump_times is not None:
        centres.extend(np.asarray(jump_times, dtype=float).tolist())
    for centre in centres:
        near |= np.abs(t - centre) <= half_width
    return [Regime.JUMP_WINDOW if flag else Regime.QUIET for flag in near]


def build_records(
    model: str,
    t: np.ndarray,
    v_hat: np.ndarray,
    rv: np.ndarray,
    regime: List[Regime],
) -> ForecastRecords:
    """Aligned records of one model; NaN forecasts count as skipped."""
    v_hat = np.asarray(v_hat, dtype=float)
    skipped = int(np.sum(~np.isfinite(v_hat)))
    if skipped:
        logger.info("%s: %d decision time(s) without a forecast.", model, skipped)
    return ForecastRecords(model=model, t=t, v_hat=v_hat, rv=rv, regime=regime, skipped=skipped)


def run_bench(
    cfg: RunConfig,
    seed: int,
    scenario: Optional[Scenario] = None,
) -> Tuple[BenchResult, Dict[str, ForecastRecords]]:
    """End-to-end variance-forecast comparison on one synthetic scenario.

    Simulates the scenario, forward-filters it with the regime measurement variance,
    calibrates causally with drift re-filtering, then forecasts with the jump-diffusion
    model and the four baselines. c_J is tuned on the validation third and every model is
    scored on the same test-third decision times, and again on every decision time (all
    timestamps but the last h).

    Args:
        cfg: Run config; the scenario, filter, em and bench blocks are used.
        seed: Scenario seed.
        scenario: A scenario to reuse instead of simulating one.

    Returns:
        Tuple of the metric table and the records of every model on every decision time.
    """
    if scenario is None:
        scenario = simulate_scenario(cfg.scenario, seed)
    dt = cfg.scenario.dt
    first = kalman_filter_smoother(
        scenario.y,
        scenario.meas_var,
        dt=dt,
        proc_window=cfg.filter.proc_window,
        proc_floor=cfg.filter.proc_floor,
        halt_inflation=cfg.filter.halt_inflation,
    )
    # A fixed number of outer loops keeps early estimates independent of later data.
    em_cfg = cfg.em.model_copy(update={"causal": True, "tol": 0.0, "dt": dt})
    calibration = calibrate(first, em_cfg, cfg.scenario.kernel.to_params(dt=dt, seed=seed))
    x_hat = calibration.filter_out.x_filter

    task = ForecastTask(h=cfg.bench.h, dt=dt, n=x_hat.size, schedule=scenario.schedule)
    train, val, test = task.splits()
    rv = realized_variance(x_hat, task.h)
    t = np.arange(task.n_decisions) * dt
    jump_times = (np.flatnonzero(calibration.responsibilities.jump_flags) + 1) * dt
    regimes = regime_labels(t, task.schedule, cfg.bench.regime_half_width, jump_times)

    base, jump = rn_jd_components(calibration.estimates, task, cfg.bench)
    c_J = tune_cj(base[val], jump[val], rv[val], cfg.bench.cj_grid, cfg.bench.cj_tie_tolerance)
    x_train = x_hat[: train.stop]
    x_calibration = x_hat[: val.stop]
    jobs = {
        "RN-JD": lambda: rn_jd_forecast(calibration.estimates, task, c_J, cfg.bench),
        "RW-logit": lambda: rw_logit(x_train, task),
        "Logit-const": lambda: const_sigma_logit(x_calibration, task),
        "WF-Jacobi": lambda: wf_jacobi(x_hat, x_train, task),
        "AR1-GARCH": lambda: ar_garch(x_hat, x_train, task, cfg.bench.garch_scale),
    }
    forecasts = parallel_map(lambda name: jobs[name](), MODEL_IDS, settings.BELIEFKIT_MAX_WORKERS)
    records = {name: build_records(name, t, forecasts[name], rv, regimes) for name in MODEL_IDS}
    tested = {name: records[name].subset(test) for name in MODEL_IDS}
    result = BenchResult(
        seed=seed,
        c_J=c_J,
        reports=[evaluate(tested[name]) for name in MODEL_IDS],
        skipped={name: tested[name].skipped for name in MODEL_IDS},
        n_test=test.stop - test.start,
        full_sample=[evaluate(records[name]) for name in MODEL_IDS],
        n_full=task.n_decisions,
    )
    return result, records
