"""The dependence module estimates de-jumped correlation, co-jumps and hedge ratios for event pairs."""
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import logger, settings
from ..models import (
    DependenceConfig,
    HedgeRatio,
    PairDependence,
    PairResult,
    PairState,
    SurfaceConfig,
    SurfaceLayer,
)
from ..utils import parallel_map
from .kernel import logistic_maps, sigmoid
from .surface import bin_samples, evaluate_layer, fit_surface


def _rolling_sum(values: np.ndarray, window: int) -> np.ndarray:
    return pd.Series(values).rolling(window, min_periods=window).sum().to_numpy()


def dejumped_correlation(
    x_i: np.ndarray,
    x_j: np.ndarray,
    gamma_i: np.ndarray,
    gamma_j: np.ndarray,
    window: int = 300,
    tau_J: float = 0.7,
    min_valid: int = 30,
) -> np.ndarray:
    """Rolling correlation of probability increments on steps without a jump in either series.

    Increments are S'(x) dx; jump steps (max(gamma_i, gamma_j) >= tau_J) are dropped from
    the window sums. Windows with fewer than `min_valid` usable steps are NaN.

    Args:
        x_i: Filtered logit path of event i.
        x_j: Filtered logit path of event j, on the same grid.
        gamma_i: Jump responsibilities per increment of event i.
        gamma_j: Jump responsibilities per increment of event j.
        window: Window in steps.
        tau_J: Jump flag threshold.
        min_valid: Usable steps needed per window.

    Returns:
        np.ndarray: Correlation per increment, clamped to [-1, 1].
    """
    x_i, x_j = np.asarray(x_i, dtype=float), np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape:
        raise ValueError(f"paths must share a grid, got {x_i.size} and {x_j.size} points")
    if window < 60:
        raise ValueError(f"window must cover at least 60 steps, got {window}")
    _, sprime_i, _ = logistic_maps(x_i[:-1])
    _, sprime_j, _ = logistic_maps(x_j[:-1])
    a = sprime_i * np.diff(x_i)
    b = sprime_j * np.diff(x_j)
    usable = (np.maximum(gamma_i, gamma_j) < tau_J) & np.isfinite(a) & np.isfinite(b)
    a = np.where(usable, a, 0.0)
    b = np.where(usable, b, 0.0)
    count = _rolling_sum(usable.astype(float), window)
    cov = _rolling_sum(a * b, window)
    var_i = _rolling_sum(a * a, window)
    var_j = _rolling_sum(b * b, window)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = cov / np.sqrt(var_i * var_j)
    defined = (count >= min_valid) & (var_i > 0) & (var_j > 0)
    return np.where(defined, np.clip(rho, -1.0, 1.0), np.nan)


def _joint_steps(flags_i: np.ndarray, flags_j: np.ndarray, lag: int) -> Tuple[np.ndarray, np.ndarray]:
    """Matched (step_i, step_j) index pairs of jointly flagged jumps.

    Every flagged step is used at most once. Candidate pairs within `lag` steps are taken
    closest first, ties broken by the earlier pair; swapping the two series swaps the pairs.
    """
    if lag == 0:
        steps = np.flatnonzero(flags_i & flags_j)
        return steps, steps
    steps_j = np.flatnonzero(flags_j)
    cand_i, cand_j = [], []
    for u in np.flatnonzero(flags_i):
        near = steps_j[np.abs(steps_j - u) <= lag]
        cand_i.extend([u] * near.size)
        cand_j.extend(near.tolist())
    cand_i, cand_j = np.asarray(cand_i, dtype=int), np.asarray(cand_j, dtype=int)
    order = np.lexsort((cand_i + cand_j, np.abs(cand_i - cand_j)))
    used_i, used_j = set(), set()
    pairs_i, pairs_j = [], []
    for k in order:
        u, v = int(cand_i[k]), int(cand_j[k])
        if u in used_i or v in used_j:
            continue
        used_i.add(u)
        used_j.add(v)
        pairs_i.append(u)
        pairs_j.append(v)
    ranked = np.argsort(pairs_i, kind="stable")
    return np.asarray(pairs_i, dtype=int)[ranked], np.asarray(pairs_j, dtype=int)[ranked]


def cojump_moments(
    x_i: np.ndarray,
    x_j: np.ndarray,
    gamma_i: np.ndarray,
    gamma_j: np.ndarray,
    dt: float = 1.0,
    tau_J: float = 0.7,
    lag_tolerance: int = 0,
) -> Tuple[float, float, int]:
    """Joint jump intensity and mean product of joint probability jumps.

    A joint flag is a step where both responsibilities exceed tau_J; with a lag tolerance
    flagged steps of i and j within that many steps are paired one to one, closest first.

    Returns:
        Tuple of (intensity per second, mean product of the p increments, joint count).
    """
    gamma_i, gamma_j = np.asarray(gamma_i), np.asarray(gamma_j)
    steps_i, steps_j = _joint_steps(gamma_i > tau_J, gamma_j > tau_J, lag_tolerance)
    if steps_i.size == 0:
        return 0.0, 0.0, 0
    dp_i = np.diff(sigmoid(np.asarray(x_i, dtype=float)))
    dp_j = np.diff(sigmoid(np.asarray(x_j, dtype=float)))
    intensity = steps_i.size / (gamma_i.size * dt)
    return float(intensity), float(np.mean(dp_i[steps_i] * dp_j[steps_j])), int(steps_i.size)


def beta_hedge(
    state: PairState,
    alpha: float = 0.7,
    clamp_abs: float = 10.0,
    cojump: Optional[PairDependence] = None,
    sprime_floor: float = 1e-4,
    vol_scaled: bool = False,
) -> HedgeRatio:
    """Instantaneous hedge ratio of event i against event j.

    beta = (S'_i / S'_j) rho, optionally times sigma_i / sigma_j. The effective ratio is
    alpha * beta plus the co-jump correction M2 * Lambda / (S'_j^2 sigma_j^2), clamped to
    +-clamp_abs.
    """
    _, sprime_i, _ = logistic_maps(state.x_i)
    _, sprime_j, _ = logistic_maps(state.x_j)
    sprime_j = max(float(sprime_j), sprime_floor)
    beta = float(sprime_i) / sprime_j * state.rho
    if vol_scaled:
        beta *= state.sigma_i / state.sigma_j if state.sigma_j > 0 else 0.0
    correction = 0.0
    if cojump is not None and cojump.cojump_intensity > 0:
        if state.sigma_j > 0:
            correction = cojump.cojump_m2 * cojump.cojump_intensity / (sprime_j**2 * state.sigma_j**2)
        else:
            logger.warning("Hedge leg has zero belief volatility; the co-jump correction is skipped.")
    effective = float(np.clip(alpha * beta + correction, -clamp_abs, clamp_abs))
    return HedgeRatio(
        beta=beta,
        shrinkage_alpha=alpha,
        clamp_abs=clamp_abs,
        jump_correction=correction,
        beta_effective=effective,
    )


def fit_rho_surface(
    tau: np.ndarray,
    m: np.ndarray,
    rho: np.ndarray,
    cfg: Optional[SurfaceConfig] = None,
    alpha: Optional[float] = None,
) -> SurfaceLayer:
    """Smooth a correlation series over (tau, m) with a signed spline layer."""
    cfg = cfg or SurfaceConfig()
    grid = bin_samples(tau, m, rho, np.ones_like(np.asarray(rho, dtype=float)), cfg, layer="rho")
    return fit_surface(grid, alpha=alpha, cfg=cfg, nonnegative=False)


def evaluate_rho(layer: SurfaceLayer, tau, m) -> np.ndarray:
    """Evaluate a correlation surface and clamp to [-1, 1]."""
    return np.clip(evaluate_layer(layer, tau, m), -1.0, 1.0)


def _latest(values: np.ndarray) -> float:
    finite = np.asarray(values, dtype=float)
    finite = finite[np.isfinite(finite)]
    return float(finite[-1]) if finite.size else 0.0


def estimate_pair(
    name: str,
    series_i: Dict[str, np.ndarray],
    series_j: Dict[str, np.ndarray],
    cfg: DependenceConfig,
    dt: float = 1.0,
) -> PairResult:
    """Dependence layer and current hedge ratio of one pair.

    Each series is a mapping with the filtered path `x_hat`, the responsibilities `gamma`
    per increment and the diffusive variance `sigma_b2` per increment.
    """
    x_i, x_j = series_i["x_hat"], series_j["x_hat"]
    n = min(x_i.size, x_j.size)
    x_i, x_j = x_i[:n], x_j[:n]
    gamma_i, gamma_j = series_i["gamma"][: n - 1], series_j["gamma"][: n - 1]
    rho = dejumped_correlation(x_i, x_j, gamma_i, gamma_j, cfg.window, cfg.tau_J, cfg.min_valid)
    intensity, m2, n_joint = cojump_moments(x_i, x_j, gamma_i, gamma_j, dt, cfg.tau_J, cfg.lag_tolerance)
    dependence = PairDependence(
        t=(np.arange(n - 1) + 1) * dt,
        rho=rho,
        cojump_intensity=intensity,
        cojump_m2=m2,
        n_joint=n_joint,
        window=cfg.window * dt,
    )
    state = PairState(
        x_i=float(x_i[-1]),
        x_j=float(x_j[-1]),
        sigma_i=float(np.sqrt(max(_latest(series_i["sigma_b2"]), 0.0))),
        sigma_j=float(np.sqrt(max(_latest(series_j["sigma_b2"]), 0.0))),
        rho=dependence.rho_latest,
    )
    hedge = beta_hedge(state, cfg.shrinkage_alpha, cfg.clamp_abs, dependence, cfg.sprime_floor, cfg.vol_scaled)
    return PairResult(name=name, dependence=dependence, hedge=hedge)


def estimate_pairs(
    base: Dict[str, np.ndarray],
    others: Dict[str, Dict[str, np.ndarray]],
    cfg: DependenceConfig,
    dt: float = 1.0,
) -> Sequence[PairResult]:
    """Estimate the dependence of one series against several others in parallel."""
    results = parallel_map(
        lambda name: estimate_pair(name, base, others[name], cfg, dt), list(others), settings.BELIEFKIT_MAX_WORKERS
    )
    return list(results.values())
