"""The baselines module holds the comparison forecasters of the variance benchmark.

Every forecaster is fitted on the slice it is handed and forecasts at decision time t
from data up to t only.
"""
import warnings
from typing import Dict, NamedTuple, Optional

import numpy as np
from arch import arch_model

from ..config import logger
from ..models import ForecastTask, InsufficientDataError
from .kernel import logistic_maps, sigmoid

FALLBACK_ALPHA = 0.05
FALLBACK_BETA = 0.90
MIN_FIT_STEPS = 30


class GarchFit(NamedTuple):
    """AR(1) mean and GARCH(1,1) variance parameters on scaled probability increments."""

    const: float
    phi: float
    omega: float
    alpha: float
    beta: float
    fallback: bool = False


def _mean_square_increment(x_fit: np.ndarray) -> float:
    dx = np.diff(np.asarray(x_fit, dtype=float))
    if dx.size < MIN_FIT_STEPS:
        raise InsufficientDataError("Baseline fit slice", dx.size, MIN_FIT_STEPS)
    return float(np.mean(dx**2))


def rw_logit(x_train: np.ndarray, task: ForecastTask) -> np.ndarray:
    """Random walk in logit: h times the training mean of (dx)^2 at every decision time."""
    return np.full(task.n_decisions, task.h * _mean_square_increment(x_train))


def const_sigma_logit(x_calibration: np.ndarray, task: ForecastTask) -> np.ndarray:
    """Constant-volatility logit diffusion fitted on the train and validation slices."""
    return np.full(task.n_decisions, task.h * _mean_square_increment(x_calibration))


def _map_to_logit(p_variance: np.ndarray, x_now: np.ndarray) -> np.ndarray:
    """Divide a probability-variance forecast by S'(x_t)^2."""
    _, sprime, _ = logistic_maps(x_now)
    return p_variance / sprime**2


def fit_jacobi(x_train: np.ndarray, dt: float = 1.0) -> Dict[str, float]:
    """Moment-matched Jacobi (Wright-Fisher) diffusion dp = kappa (theta - p) dt + sqrt(2 alpha p (1-p)) dW.

    kappa and theta come from a regression of dp on p; alpha from sum(dp^2) over
    sum(2 p (1 - p) dt).
    """
    p = sigmoid(np.asarray(x_train, dtype=float))
    if p.size <= MIN_FIT_STEPS:
        raise InsufficientDataError("Jacobi fit slice", p.size - 1, MIN_FIT_STEPS)
    dp = np.diff(p)
    lagged = p[:-1]
    design = np.column_stack([np.ones_like(lagged), lagged])
    (intercept, slope), *_ = np.linalg.lstsq(design, dp, rcond=None)
    kappa = max(-slope / dt, 0.0)
    theta = float(np.clip(-intercept / slope, 0.0, 1.0)) if slope < 0 else float(np.mean(p))
    scale = float(np.sum(2.0 * lagged * (1.0 - lagged) * dt))
    alpha = float(np.sum(dp**2) / scale) if scale > 0 else 0.0
    return {"kappa": float(kappa), "theta": theta, "alpha": alpha}


def wf_jacobi(x_hat: np.ndarray, x_train: np.ndarray, task: ForecastTask) -> np.ndarray:
    """Jacobi forecast: forward sum of 2 alpha m_k (1 - m_k) dt along the mean path, mapped to x."""
    fit = fit_jacobi(x_train, task.dt)
    x_now = np.asarray(x_hat, dtype=float)[: task.n_decisions]
    p_now = sigmoid(x_now)
    decay = np.exp(-fit["kappa"] * task.dt * np.arange(task.h))
    mean_path = fit["theta"] + (p_now[:, None] - fit["theta"]) * decay[None, :]
    p_variance = 2.0 * fit["alpha"] * task.dt * np.sum(mean_path * (1.0 - mean_path), axis=1)
    return _map_to_logit(p_variance, x_now)


def _fallback_garch(y: np.ndarray) -> GarchFit:
    lagged, current = y[:-1], y[1:]
    design = np.column_stack([np.ones_like(lagged), lagged])
    (const, phi), *_ = np.linalg.lstsq(design, current, rcond=None)
    resid = current - const - phi * lagged
    variance = float(np.var(resid))
    omega = variance * (1.0 - FALLBACK_ALPHA - FALLBACK_BETA)
    return GarchFit(float(const), float(phi), omega, FALLBACK_ALPHA, FALLBACK_BETA, fallback=True)


def fit_garch(x_train: np.ndarray, scale: float = 100.0) -> GarchFit:
    """AR(1)-GARCH(1,1) on scaled probability increments of the training slice.

    Falls back to variance targeting with (alpha, beta) = (0.05, 0.90) when the fit fails,
    does not converge or is not covariance stationary.
    """
    y = np.diff(sigmoid(np.asarray(x_train, dtype=float))) * scale
    if y.size < MIN_FIT_STEPS:
        raise InsufficientDataError("GARCH fit slice", y.size, MIN_FIT_STEPS)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = arch_model(y, mean="AR", lags=1, vol="GARCH", p=1, q=1, rescale=False).fit(disp="off")
        params = result.params
        fit = GarchFit(
            const=float(params.iloc[0]),
            phi=float(params.iloc[1]),
            omega=float(params["omega"]),
            alpha=float(params["alpha[1]"]),
            beta=float(params["beta[1]"]),
        )
        if result.convergence_flag != 0 or fit.alpha + fit.beta >= 1.0 or fit.omega <= 0:
            raise ValueError(f"unusable GARCH fit {fit}")
        return fit
    except Exception as exc:  # noqa: BLE001
        logger.warning("GARCH fit failed (%s); using alpha=%.2f, beta=%.2f with variance targeting.", exc, FALLBACK_ALPHA, FALLBACK_BETA)
        return _fallback_garch(y)


def ar_garch(x_hat: np.ndarray, x_train: np.ndarray, task: ForecastTask, scale: float = 100.0, fit: Optional[GarchFit] = None) -> np.ndarray:
    """AR(1)-GARCH(1,1) forecast of probability variance, forward-iterated and mapped to x.

    The conditional variance is filtered through the whole path with the training
    parameters, so the forecast at t only reads increments up to t.
    """
    fit = fit or fit_garch(x_train, scale)
    x_hat = np.asarray(x_hat, dtype=float)
    y = np.diff(sigmoid(x_hat)) * scale
    persistence = fit.alpha + fit.beta
    long_run = fit.omega / (1.0 - persistence)
    # sigma2[u] is the conditional variance of increment u given increments before it.
    sigma2 = np.empty(y.size + 1)
    sigma2[0] = long_run
    previous = 0.0
    for u in range(y.size):
        resid = y[u] - fit.const - fit.phi * previous
        sigma2[u + 1] = fit.omega + fit.alpha * resid**2 + fit.beta * sigma2[u]
        previous = y[u]
    n_dec = task.n_decisions
    # The first forecast step at t is increment t, whose variance is sigma2[t].
    powers = persistence ** np.arange(task.h)
    next_step = sigma2[:n_dec]
    total = task.h * long_run + (next_step - long_run) * powers.sum()
    p_variance = np.maximum(total, 0.0) / scale**2
    return _map_to_logit(p_variance, x_hat[:n_dec])
