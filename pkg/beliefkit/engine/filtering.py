"""The filtering module turns raw ticks into an observed logit series and filters it.

The observed logit y = logit(p_tilde) is modelled as the latent logit x plus
heteroskedastic microstructure noise. A local-level Kalman filter with an optional
drift recovers x, and the RTS smoother runs backwards over the stored predictions.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.linear_model import HuberRegressor
from sklearn.preprocessing import StandardScaler
from statsmodels.stats.diagnostic import acorr_ljungbox

from ..config import logger
from ..models import (
    DataQualityError,
    DiagnosticsReport,
    EmptySeriesError,
    FilterOutput,
    InsufficientDataError,
    NoiseModelCoeffs,
    TickFlag,
    TickRecord,
    UniformSeries,
)
from .kernel import logit

LJUNG_BOX_LAGS = (10, 20)
MIN_DIAGNOSTIC_POINTS = 100


def _tick_frame(ticks: Union[pd.DataFrame, Sequence[TickRecord]]) -> pd.DataFrame:
    frame = ticks.copy() if isinstance(ticks, pd.DataFrame) else TickRecord.to_frame(list(ticks))
    if "ts_ms" not in frame.columns and "ts" in frame.columns:
        frame = frame.rename(columns={"ts": "ts_ms"})
    for column in ("trade_px", "trade_sz", "depth"):
        if column not in frame.columns:
            frame[column] = np.nan
    if "flags" not in frame.columns:
        frame["flags"] = ""
    return frame.reset_index(drop=True)


def _debounce(frame: pd.DataFrame, tick: float) -> pd.DataFrame:
    """Drop quote-only updates that move the mid by under a tick and revert on the next update."""
    mid = frame["mid"]
    prev = mid.shift(1)
    nxt = mid.shift(-1)
    quote_only = ~frame["has_trade"]
    flicker = quote_only & (mid != prev) & ((mid - prev).abs() < tick) & np.isclose(nxt, prev)
    if flicker.any():
        logger.debug("Debounced %d flickering quote updates.", int(flicker.sum()))
    return frame.loc[~flicker.fillna(False)]


def _aggressor_sign(frame: pd.DataFrame) -> np.ndarray:
    px = frame["trade_px"].to_numpy()
    sign = np.sign(px - frame["mid"].to_numpy())
    sign = np.where(px >= frame["ask"].to_numpy(), 1.0, sign)
    sign = np.where(px <= frame["bid"].to_numpy(), -1.0, sign)
    return np.nan_to_num(sign)


def canonical_mid(
    ticks: Union[pd.DataFrame, Sequence[TickRecord]],
    bin_seconds: float = 1.0,
    tick: float = 0.001,
    eps: float = 1e-5,
) -> UniformSeries:
    """Resample ticks to a uniform grid of trade-weighted mids.

    Bins with at least one trade use the weighted mean of the quoted mids with weights
    trade_sz / (1 + spread_in_ticks); bins with quotes only take the last mid; empty bins
    carry the previous mid forward with a zero trade rate. Crossed, locked and halted
    ticks are dropped before binning.

    Args:
        ticks: Tick records or a frame in the tick CSV layout.
        bin_seconds: Bin width in seconds.
        tick: Price tick in probability units.
        eps: Probability clamp.

    Returns:
        UniformSeries: The clamped canonical mid with per-bin covariates.
    """
    if bin_seconds <= 0:
        raise ValueError("bin_seconds must be positive")
    frame = _tick_frame(ticks)
    if frame.empty:
        raise EmptySeriesError("tick series")
    if np.any(np.diff(frame["ts_ms"].to_numpy()) < 0):
        raise DataQualityError("Tick timestamps must be nondecreasing.")

    flags = frame["flags"].map(lambda tokens: TickFlag.parse(tokens if isinstance(tokens, str) else None))
    halt = flags.map(lambda f: TickFlag.HALT in f)
    crossed = flags.map(lambda f: TickFlag.CROSSED in f) | (frame["bid"] > frame["ask"])
    locked = flags.map(lambda f: TickFlag.LOCKED in f)
    tradable = ~(halt | crossed | locked)
    if not tradable.any():
        raise DataQualityError("Every tick is flagged halt, crossed or locked; no tradable quotes remain.")

    ts0 = int(frame.loc[tradable, "ts_ms"].iloc[0])
    width_ms = bin_seconds * 1000.0
    frame["bin"] = np.floor((frame["ts_ms"] - ts0) / width_ms).astype(int)
    halted_bins = set(frame.loc[halt & (frame["bin"] >= 0), "bin"])

    quotes = frame.loc[tradable & (frame["bin"] >= 0)].copy()
    quotes["mid"] = 0.5 * (quotes["bid"] + quotes["ask"])
    quotes["spread"] = quotes["ask"] - quotes["bid"]
    quotes["has_trade"] = quotes["trade_sz"].fillna(0.0) > 0
    quotes = _debounce(quotes, tick)

    traded = quotes.loc[quotes["has_trade"]].copy()
    traded["w"] = traded["trade_sz"] / (1.0 + traded["spread"] / tick)
    traded["w_mid"] = traded["w"] * traded["mid"]
    traded["signed"] = _aggressor_sign(traded) * traded["trade_sz"]

    by_bin = quotes.groupby("bin")
    trade_bins = traded.groupby("bin")
    n_bins = int(frame["bin"].max()) + 1
    index = pd.RangeIndex(n_bins)

    vwap = (trade_bins["w_mid"].sum() / trade_bins["w"].sum()).reindex(index)
    last_mid = by_bin["mid"].last().reindex(index)
    mid = vwap.where(vwap.notna(), last_mid)

    quoted = pd.Series(index.isin(by_bin.size().index), index=index)
    status = pd.Series(np.nan, index=index)
    status[quoted] = 0.0
    status[index.isin(list(halted_bins)) & ~quoted] = 1.0
    halted = status.ffill().fillna(0.0).to_numpy() == 1.0

    depth = by_bin["depth"].mean().reindex(index).ffill()
    inv_depth = (1.0 / depth).replace([np.inf, -np.inf], np.nan).fillna(0.0)
    size = trade_bins["trade_sz"].sum().reindex(index)
    imbalance = (trade_bins["signed"].sum().reindex(index) / size).fillna(0.0)

    p_tilde = np.clip(mid.ffill().to_numpy(), eps, 1.0 - eps)
    return UniformSeries(
        t=index.to_numpy() * bin_seconds,
        p_tilde=p_tilde,
        y=logit(p_tilde),
        spread=by_bin["spread"].mean().reindex(index).ffill().to_numpy(),
        inv_depth=inv_depth.to_numpy(),
        trade_rate=trade_bins.size().reindex(index).fillna(0.0).to_numpy() / bin_seconds,
        imbalance=np.clip(imbalance.to_numpy(), -1.0, 1.0),
        halted=halted,
        dt=bin_seconds,
        t0_ms=ts0,
    )


def noise_variance(covariates: Union[UniformSeries, np.ndarray], coeffs: NoiseModelCoeffs) -> np.ndarray:
    """Predicted measurement variance a0 + a1 s^2 + a2 / d + a3 r + a4 iota^2, clipped."""
    design = covariates.covariates() if isinstance(covariates, UniformSeries) else np.asarray(covariates, dtype=float)
    design = np.atleast_2d(design)
    if not np.all(np.isfinite(design)):
        raise DataQualityError("Noise-model covariates contain non-finite values.")
    a = np.asarray(coeffs.a, dtype=float)
    raw = a[0] + design @ a[1:]
    return np.clip(raw, coeffs.clamp_lo, coeffs.clamp_hi)


def _block_means(values: np.ndarray, block: int) -> np.ndarray:
    n_blocks = values.shape[0] // block
    trimmed = values[: n_blocks * block]
    return trimmed.reshape(n_blocks, block, *values.shape[1:]).mean(axis=1)


def fit_noise_model(
    series: UniformSeries,
    block: int = 20,
    epsilon: float = 1.35,
    clamp_lo: float = 1e-6,
    clamp_hi: float = 4.0,
) -> NoiseModelCoeffs:
    """Fit the noise model by Huber regression of short-horizon noise proxies on covariates.

    The proxy -dy_t * dy_{t+1} has expectation equal to the measurement variance at t+1
    under the local-level model. Block means over `block` steps tame its heavy tails
    before the robust fit.
    """
    dy = np.diff(series.y)
    target = -dy[:-1] * dy[1:]
    design = series.covariates()[1:-1]
    keep = ~(series.halted[:-2] | series.halted[1:-1] | series.halted[2:])
    target_blocks = _block_means(target[keep], block)
    design_blocks = _block_means(design[keep], block)
    if target_blocks.size < 10:
        level = float(np.clip(np.mean(target[keep]) if keep.any() else clamp_lo, clamp_lo, clamp_hi))
        logger.warning("Only %d noise blocks; using a constant measurement variance %.3g.", target_blocks.size, level)
        return NoiseModelCoeffs(a=[level, 0.0, 0.0, 0.0, 0.0], clamp_lo=clamp_lo, clamp_hi=clamp_hi)

    scaler = StandardScaler().fit(design_blocks)
    model = HuberRegressor(epsilon=epsilon, alpha=1e-6, max_iter=1000)
    model.fit(scaler.transform(design_blocks), target_blocks)
    slopes = model.coef_ / scaler.scale_
    intercept = float(model.intercept_ - np.sum(slopes * scaler.mean_))
    coeffs = NoiseModelCoeffs(a=[intercept, *slopes.tolist()], clamp_lo=clamp_lo, clamp_hi=clamp_hi)
    logger.info("Fitted noise model on %d blocks: a=%s", target_blocks.size, np.round(coeffs.a, 6).tolist())
    return coeffs


def process_variance_proxy(y: np.ndarray, meas_var: np.ndarray, window: int = 120, floor: float = 0.05) -> np.ndarray:
    """Trailing rolling mean of dy^2 less twice the measurement variance, floored.

    Returns one value per transition.
    """
    dy2 = pd.Series(np.diff(y) ** 2)
    r = pd.Series(0.5 * (meas_var[1:] + meas_var[:-1]))
    mean_dy2 = dy2.rolling(window, min_periods=1).mean()
    mean_r = r.rolling(window, min_periods=1).mean()
    return np.maximum(mean_dy2 - 2.0 * mean_r, floor * mean_dy2).to_numpy()


def _per_transition(values: Optional[np.ndarray], n: int, name: str) -> Optional[np.ndarray]:
    if values is None:
        return None
    values = np.asarray(values, dtype=float)
    if values.size == n:
        values = values[:-1]
    if values.size != n - 1:
        raise ValueError(f"{name} must have {n - 1} or {n} entries, got {values.size}")
    return values


def kalman_filter_smoother(
    series: Union[UniformSeries, np.ndarray],
    meas_var,
    drift: Optional[np.ndarray] = None,
    proc_var: Optional[np.ndarray] = None,
    dt: Optional[float] = None,
    halted: Optional[np.ndarray] = None,
    proc_window: int = 120,
    proc_floor: float = 0.05,
    halt_inflation: float = 10.0,
) -> FilterOutput:
    """Run the local-level Kalman filter and RTS smoother.

    The state moves as x_{u+1} = x_u + drift_u dt + w_u with Var(w_u) = proc_var_u and
    is observed as y_u = x_u + eta_u with Var(eta_u) = meas_var_u. Halted steps freeze the
    state; the first step after a halt inflates the predicted variance by
    `halt_inflation`.

    Args:
        series: The observed series, or the raw observed logits.
        meas_var: Measurement variance per step (scalar or array).
        drift: Optional drift per transition (per second).
        proc_var: Optional process variance per transition; the rolling proxy is used
            when absent.
        dt: Step in seconds; taken from the series when given one.
        halted: Halted steps when `series` is a raw array.
        proc_window: Steps of the rolling process-noise proxy.
        proc_floor: Floor of the proxy as a share of the rolling mean of dy^2.
        halt_inflation: Variance inflation when a halt lifts.

    Returns:
        FilterOutput: Smoothed and filtered paths, variances and innovations.
    """
    if isinstance(series, UniformSeries):
        y = series.y
        dt = series.dt if dt is None else dt
        halted = series.halted if halted is None else halted
    else:
        y = np.asarray(series, dtype=float)
    dt = 1.0 if dt is None else float(dt)
    n = y.size
    if n == 0:
        raise EmptySeriesError("observed series")
    halted = np.zeros(n, dtype=bool) if halted is None else np.asarray(halted, dtype=bool)
    R = np.broadcast_to(np.asarray(meas_var, dtype=float), (n,)).copy()
    if np.any(~np.isfinite(R)) or np.any(R <= 0):
        raise DataQualityError("Measurement variance must be finite and strictly positive at every step.")
    drift = _per_transition(drift, n, "drift")
    drift = np.zeros(n - 1) if drift is None else np.nan_to_num(drift)
    Q = _per_transition(proc_var, n, "proc_var")
    if Q is None:
        Q = process_variance_proxy(y, R, proc_window, proc_floor) if n > 1 else np.zeros(0)

    x_f = np.empty(n)
    P_f = np.empty(n)
    x_pred = np.empty(n)
    P_pred = np.empty(n)
    innovations = np.full(n - 1, np.nan)
    innovation_var = np.full(n - 1, np.nan)
    x_f[0] = x_pred[0] = y[0]
    P_f[0] = P_pred[0] = R[0]
    loglik = 0.0
    for u in range(1, n):
        if halted[u]:
            x_pred[u] = x_f[u] = x_f[u - 1]
            P_pred[u] = P_f[u] = P_f[u - 1]
            continue
        x_pred[u] = x_f[u - 1] + drift[u - 1] * dt
        P_pred[u] = P_f[u - 1] + Q[u - 1]
        if halted[u - 1]:
            P_pred[u] *= halt_inflation
        S = P_pred[u] + R[u]
        v = y[u] - x_pred[u]
        gain = P_pred[u] / S
        x_f[u] = x_pred[u] + gain * v
        P_f[u] = P_pred[u] * R[u] / S
        innovations[u - 1] = v
        innovation_var[u - 1] = S
        loglik -= 0.5 * (np.log(2.0 * np.pi * S) + v * v / S)

    x_s = x_f.copy()
    P_s = P_f.copy()
    for u in range(n - 2, -1, -1):
        J = P_f[u] / P_pred[u + 1] if P_pred[u + 1] > 0 else 0.0
        x_s[u] = x_f[u] + J * (x_s[u + 1] - x_pred[u + 1])
        P_s[u] = P_f[u] + J * J * (P_s[u + 1] - P_pred[u + 1])

    return FilterOutput(
        x_hat=x_s,
        var_hat=P_s,
        x_filter=x_f,
        var_filter=P_f,
        innovations=innovations,
        innovation_var=innovation_var,
        loglik=float(loglik),
        y=y,
        meas_var=R,
        proc_var=Q,
        halted=halted,
        dt=dt,
    )


def rerun_smoother(previous: FilterOutput, drift: Optional[np.ndarray], halt_inflation: float = 10.0) -> FilterOutput:
    """Re-run the filter and smoother on the inputs of a previous pass with a new drift."""
    return kalman_filter_smoother(
        previous.y,
        previous.meas_var,
        drift=drift,
        proc_var=previous.proc_var,
        dt=previous.dt,
        halted=previous.halted,
        halt_inflation=halt_inflation,
    )


def residual_diagnostics(
    output: FilterOutput,
    jump_flags: Optional[np.ndarray] = None,
    lags: Tuple[int, ...] = LJUNG_BOX_LAGS,
    level: float = 0.01,
) -> DiagnosticsReport:
    """Test the standardised innovations for whiteness, calibration and tails.

    Args:
        output: The filter pass to check.
        jump_flags: Optional per-innovation jump flags excluded from the kurtosis check.
        lags: Ljung-Box lags.
        level: Test level of every check.

    Returns:
        DiagnosticsReport: Statistics and pass/fail flags.
    """
    valid = np.isfinite(output.innovations) & np.isfinite(output.innovation_var)
    raw = output.innovations[valid]
    n = int(raw.size)
    if n < MIN_DIAGNOSTIC_POINTS:
        raise InsufficientDataError("Residual diagnostics", n, MIN_DIAGNOSTIC_POINTS)
    if np.ptp(raw) == 0.0:
        logger.warning("Innovations are constant; diagnostics are degenerate.")
        nan_map = {lag: float("nan") for lag in lags}
        return DiagnosticsReport(
            n=n,
            ljung_box=nan_map,
            ljung_box_pvalue=nan_map,
            ljung_box_pass=False,
            variance_ratio=float(np.mean(raw**2 / output.innovation_var[valid])),
            variance_ratio_pass=False,
            excess_kurtosis=float("nan"),
            kurtosis_pass=False,
            degenerate_variance=True,
        )
    z = raw / np.sqrt(output.innovation_var[valid])

    table = acorr_ljungbox(z, lags=list(lags), return_df=True)
    statistics = {lag: float(table.loc[lag, "lb_stat"]) for lag in lags}
    pvalues = {lag: float(table.loc[lag, "lb_pvalue"]) for lag in lags}

    ratio = float(np.mean(z**2))
    lo = stats.chi2.ppf(level / 2.0, n) / n
    hi = stats.chi2.ppf(1.0 - level / 2.0, n) / n

    calm = z
    if jump_flags is not None:
        flags = np.asarray(jump_flags, dtype=bool)[valid]
        calm = z[~flags]
    kurt = float(stats.kurtosis(calm, fisher=True))
    band = stats.norm.ppf(1.0 - level / 2.0) * np.sqrt(24.0 / calm.size)

    return DiagnosticsReport(
        n=n,
        ljung_box=statistics,
        ljung_box_pvalue=pvalues,
        ljung_box_pass=bool(all(p >= level for p in pvalues.values())),
        variance_ratio=ratio,
        variance_ratio_pass=bool(lo <= ratio <= hi),
        excess_kurtosis=kurt,
        kurtosis_pass=bool(abs(kurt) <= band),
    )
