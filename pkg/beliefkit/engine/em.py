"""The em module separates diffusion from jumps on filtered logit increments.

Each increment is modelled as a two-component mixture: a diffusive gaussian with mean
mu * dt and variance sigma_b^2 * dt, and a jump component drawn with probability
lambda * dt. Estimates are refreshed on rolling windows, the risk-neutral drift is
recomputed from them and the smoother is re-run with that drift.
"""
import time
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import optimize, stats

from ..config import logger
from ..models import (
    CalibrationResult,
    ConfigurationError,
    DiffusiveDegenerateError,
    EmConfig,
    FilterOutput,
    InsufficientDataError,
    JumpFamily,
    JumpLaw,
    KernelParams,
    MixtureEstimates,
    Responsibilities,
    SanityReport,
)
from ..utils import ewma, time_elapsed
from .filtering import rerun_smoother
from .kernel import gaussian_compensation, jump_compensation, logistic_maps, rn_drift, sigmoid

MIN_WINDOW_STEPS = 30
EMPIRICAL_BINS = 16
SIGMA2_FLOOR = 1e-12


class WindowFit(NamedTuple):
    """Mixture parameters of one window."""

    sigma_b2: float
    lam: float
    sJ2: float
    law: JumpLaw


def _valid_mask(dx: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    valid = np.isfinite(dx)
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    return valid


def _posterior(
    residual: np.ndarray,
    sigma2: np.ndarray,
    lam_dt: np.ndarray,
    jump_logpdf: np.ndarray,
    dt: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (gamma, log-likelihood per step, degenerate mask) of the two-component mixture."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_phi = stats.norm.logpdf(residual, scale=np.sqrt(sigma2 * dt))
        log_jump = np.log(lam_dt) + jump_logpdf
        log_diff = np.log1p(-lam_dt) + log_phi
        total = np.logaddexp(log_jump, log_diff)
        gamma = np.exp(log_jump - total)
    degenerate = ~np.isfinite(total)
    gamma = np.where(degenerate, 0.5, gamma)
    return np.clip(gamma, 0.0, 1.0), np.where(degenerate, 0.0, total), degenerate


def e_step(
    dx: np.ndarray,
    mu: np.ndarray,
    est: MixtureEstimates,
    tau_J: float = 0.7,
    lambda_floor: float = 0.0,
    mask: Optional[np.ndarray] = None,
) -> Responsibilities:
    """Posterior jump probability of every increment.

    gamma = lambda dt psi / (lambda dt psi + (1 - lambda dt) phi), with phi the gaussian
    density at (mu dt, sigma_b^2 dt) and psi the jump density of the increment net of
    mu dt. Steps without an estimate or outside `mask` get gamma = 0; steps where both
    densities vanish get gamma = 0.5 and are counted.

    Args:
        dx: Increments of the filtered logit.
        mu: Drift per increment (per second).
        est: Current mixture estimates.
        tau_J: Jump flag threshold.
        lambda_floor: Floor on lambda inside the posterior (per second).
        mask: Optional increments to use.

    Returns:
        Responsibilities: Per-increment posteriors and the observed-data log-likelihood.
    """
    dx = np.asarray(dx, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), dx.shape)
    if dx.size != len(est):
        raise ValueError(f"increments ({dx.size}) and estimates ({len(est)}) must align")
    dt = est.dt
    use = _valid_mask(dx, mask) & est.valid
    residual = dx - mu * dt
    lam_dt = np.clip(np.maximum(np.nan_to_num(est.lam), lambda_floor) * dt, 0.0, 1.0 - 1e-12)
    gamma, loglik, degenerate = _posterior(
        residual, np.maximum(np.nan_to_num(est.sigma_b2), SIGMA2_FLOOR), lam_dt, est.jump_logpdf(residual), dt
    )
    degenerate &= use
    if degenerate.any():
        logger.warning("Both mixture densities vanish at %d step(s); responsibilities set to 0.5.", int(degenerate.sum()))
    gamma = np.where(use, gamma, 0.0)
    return Responsibilities(
        gamma=gamma,
        tau_J=tau_J,
        loglik=float(np.sum(loglik[use])),
        degenerate_count=int(degenerate.sum()),
    )


def _bin_edges(dx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    support = np.abs(dx[weights > 1e-3 * max(weights.max(), 1e-300)])
    radius = 1.05 * float(support.max()) if support.size else 1.0
    return np.linspace(-radius, radius, EMPIRICAL_BINS + 1)


def fit_jump_law(dx: np.ndarray, weights: np.ndarray, family: JumpFamily, sJ2: float, prev: Optional[JumpLaw] = None) -> JumpLaw:
    """Weighted maximum-likelihood jump law of the configured family."""
    if family is JumpFamily.GAUSSIAN:
        return JumpLaw.gaussian(float(np.sqrt(max(sJ2, 0.0))))
    total = float(np.sum(weights))
    if total <= 0.0:
        return prev if prev is not None and prev.family is family else JumpLaw.gaussian(0.0)
    if family is JumpFamily.DOUBLE_EXPONENTIAL:
        up = dx > 0

        def _negative_loglik(log_eta):
            eta_up, eta_down = np.exp(log_eta)
            log_norm = np.log(eta_up + eta_down)
            ll_up = 2.0 * np.log(eta_up) - log_norm - eta_up * dx
            ll_down = 2.0 * np.log(eta_down) - log_norm + eta_down * dx
            return -float(np.sum(weights * np.where(up, ll_up, ll_down)))

        start = np.log(np.full(2, np.sqrt(2.0 / max(sJ2, 1e-12))))
        solution = optimize.minimize(_negative_loglik, start, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-10})
        eta_up, eta_down = np.exp(solution.x)
        return JumpLaw(family=family, eta_up=float(eta_up), eta_down=float(eta_down))
    edges = _bin_edges(dx, weights)
    mass, _ = np.histogram(dx, bins=edges, weights=weights)
    mass = mass / mass.sum()
    mass[-1] = 1.0 - mass[:-1].sum()
    return JumpLaw(family=family, edges=edges.tolist(), masses=np.clip(mass, 0.0, None).tolist())


def fit_window(
    dx: np.ndarray,
    mu: np.ndarray,
    gamma: np.ndarray,
    valid: np.ndarray,
    dt: float,
    family: JumpFamily,
    prev: Optional[WindowFit],
    bounds: Tuple[int, int],
    min_jump_ratio: float = 0.0,
) -> WindowFit:
    """Weighted-moment M-step on one window.

    Raises:
        DiffusiveDegenerateError: The window has no diffusive weight and no previous
            window to inherit from.
    """
    w_diff = np.where(valid, 1.0 - gamma, 0.0)
    w_jump = np.where(valid, gamma, 0.0)
    residual = np.where(valid, dx - mu * dt, 0.0)
    n_valid = int(valid.sum())
    diff_weight = float(w_diff.sum())
    if diff_weight <= 0.0:
        if prev is None:
            raise DiffusiveDegenerateError(*bounds)
        sigma_b2 = prev.sigma_b2
    else:
        sigma_b2 = max(float(np.sum(w_diff * residual**2)) / (diff_weight * dt), SIGMA2_FLOOR)
    lam = float(np.sum(w_jump)) / (max(n_valid, 1) * dt)
    jump_weight = float(w_jump.sum())
    if jump_weight > 0.0:
        sJ2 = float(np.sum(w_jump * np.where(valid, dx, 0.0) ** 2)) / jump_weight
    else:
        sJ2 = prev.sJ2 if prev is not None else 0.0
    if min_jump_ratio > 0.0:
        sJ2 = max(sJ2, min_jump_ratio * sigma_b2 * dt)
    law = fit_jump_law(dx[valid], w_jump[valid], family, sJ2, prev.law if prev is not None else None)
    if family is not JumpFamily.GAUSSIAN and not law.is_degenerate:
        sJ2 = law.second_moment
    return WindowFit(sigma_b2=sigma_b2, lam=lam, sJ2=sJ2, law=law)


def diffusive_fit(
    dx: np.ndarray,
    mu: np.ndarray,
    valid: np.ndarray,
    dt: float,
    family: JumpFamily,
    prev: Optional[WindowFit],
    bounds: Tuple[int, int],
) -> WindowFit:
    """M-step with every responsibility at zero: lambda = 0, sJ2 = 0, degenerate jump law."""
    fit = fit_window(dx, mu, np.zeros(dx.shape), valid, dt, family, prev, bounds)
    return fit._replace(lam=0.0, sJ2=0.0, law=JumpLaw.gaussian(0.0))


def window_bounds(n: int, length: int) -> List[Tuple[int, int]]:
    """Windows of `length` increments with 50% overlap; the last one ends at n."""
    if n <= length:
        return [(0, n)]
    stride = max(length // 2, 1)
    bounds = [(start, start + length) for start in range(0, n - length + 1, stride)]
    if bounds[-1][1] < n:
        bounds.append((n - length, n))
    return bounds


def assemble_estimates(
    fits: List[WindowFit],
    bounds: List[Tuple[int, int]],
    n: int,
    dt: float,
    family: JumpFamily,
    causal: bool,
) -> MixtureEstimates:
    """Spread per-window fits over the increments.

    Non-causal estimates blend linearly between window centres. Causal estimates at
    increment u come from the last window ending at or before u and are NaN before.
    """
    values = {
        "sigma_b2": np.array([fit.sigma_b2 for fit in fits]),
        "lam": np.array([fit.lam for fit in fits]),
        "sJ2": np.array([fit.sJ2 for fit in fits]),
    }
    steps = np.arange(n)
    if causal:
        ends = np.array([end for _, end in bounds])
        index = np.searchsorted(ends, steps, side="right") - 1
        per_step = {name: np.where(index >= 0, grid[np.maximum(index, 0)], np.nan) for name, grid in values.items()}
        law_index = index
    else:
        centres = np.array([0.5 * (start + end - 1) for start, end in bounds])
        per_step = {name: np.interp(steps, centres, grid) for name, grid in values.items()}
        law_index = np.abs(steps[:, None] - centres[None, :]).argmin(axis=1)
    return MixtureEstimates(
        sigma_b2=per_step["sigma_b2"],
        lam=per_step["lam"],
        sJ2=per_step["sJ2"],
        law_index=law_index,
        window_starts=[start for start, _ in bounds],
        window_ends=[end for _, end in bounds],
        window_sigma_b2=values["sigma_b2"],
        window_lam=values["lam"],
        window_sJ2=values["sJ2"],
        jump_laws=[fit.law for fit in fits],
        family=family,
        dt=dt,
    )


def m_step(
    dx: np.ndarray,
    mu: np.ndarray,
    resp: Responsibilities,
    window: float,
    dt: float = 1.0,
    family: JumpFamily = JumpFamily.GAUSSIAN,
    causal: bool = False,
    prev: Optional[MixtureEstimates] = None,
    mask: Optional[np.ndarray] = None,
    min_jump_ratio: float = 0.0,
) -> MixtureEstimates:
    """Weighted-moment estimates on rolling windows.

    Per window: sigma_b^2 = sum (1-g)(dx - mu dt)^2 / (sum (1-g) dt),
    lambda = mean(g) / dt and sJ2 = sum g dx^2 / sum g. A window without diffusive weight
    inherits sigma_b^2 from the previous window (or from `prev` for the first one); a
    window without jump weight inherits sJ2 the same way, or 0.

    Args:
        dx: Increments of the filtered logit.
        mu: Drift per increment (per second).
        resp: Responsibilities from the E-step.
        window: Window length in seconds.
        dt: Step in seconds.
        family: Jump family fitted per window.
        causal: Assign estimates from completed windows only.
        prev: Estimates the first window may inherit from.
        mask: Optional increments to use.
        min_jump_ratio: Floor of sJ2 as a multiple of sigma_b^2 dt.

    Returns:
        MixtureEstimates: Per-window and per-step estimates.
    """
    dx = np.asarray(dx, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), dx.shape)
    length = int(round(window / dt))
    if length < MIN_WINDOW_STEPS:
        raise ConfigurationError("em.rolling_window", f"a window must contain at least {MIN_WINDOW_STEPS} steps, got {length}.")
    valid = _valid_mask(dx, mask)
    bounds = window_bounds(dx.size, length)
    previous = None
    if prev is not None and prev.window_sigma_b2.size:
        previous = WindowFit(
            float(prev.window_sigma_b2[0]), float(prev.window_lam[0]), float(prev.window_sJ2[0]), prev.jump_laws[0]
        )
    fits = []
    for start, end in bounds:
        fit = fit_window(
            dx[start:end],
            mu[start:end],
            resp.gamma[start:end],
            valid[start:end],
            dt,
            family,
            fits[-1] if fits else previous,
            (start, end),
            min_jump_ratio,
        )
        fits.append(fit)
    return assemble_estimates(fits, bounds, dx.size, dt, family, causal)


def _initial_fit(dx: np.ndarray, valid: np.ndarray, dt: float, family: JumpFamily, min_jump_ratio: float) -> WindowFit:
    """Jump-robust starting point: bipower variance and a 4-sigma exceedance count."""
    x = dx[valid]
    if x.size < 2:
        raise InsufficientDataError("EM initialisation", int(x.size), 2)
    sigma_b2 = max(0.5 * np.pi * float(np.mean(np.abs(x[1:]) * np.abs(x[:-1]))) / dt, SIGMA2_FLOOR)
    scale = np.sqrt(sigma_b2 * dt)
    exceed = np.abs(x - np.median(x)) > 4.0 * scale
    lam = max(int(exceed.sum()), 1) / (x.size * dt)
    sJ2 = max(float(np.mean(x[exceed] ** 2)) if exceed.any() else 0.0, 25.0 * sigma_b2 * dt, min_jump_ratio * sigma_b2 * dt)
    law = fit_jump_law(x, exceed.astype(float), family, sJ2)
    return WindowFit(sigma_b2=sigma_b2, lam=lam, sJ2=sJ2, law=law)


def _law_logpdf(fit: WindowFit, residual: np.ndarray) -> np.ndarray:
    if fit.law.is_degenerate:
        return np.full(residual.shape, -np.inf)
    return fit.law.logpdf(residual)


def _window_em(
    dx: np.ndarray,
    mu: np.ndarray,
    valid: np.ndarray,
    start: WindowFit,
    steps: int,
    cfg: EmConfig,
    bounds: Tuple[int, int],
    prev: Optional[WindowFit],
    lambda_floor: float,
    trace: Optional[List[float]] = None,
    min_jump_ratio: Optional[float] = None,
    jumps: bool = True,
) -> WindowFit:
    """Run `steps` EM iterations on one window; the window only reads its own increments."""
    fit = start
    dt = cfg.dt
    if not jumps:
        return diffusive_fit(dx, mu, valid, dt, cfg.family, prev, bounds)
    ratio = cfg.min_jump_ratio if min_jump_ratio is None else min_jump_ratio
    for _ in range(steps):
        residual = dx - mu * dt
        lam_dt = np.full(dx.shape, min(max(fit.lam, lambda_floor) * dt, 1.0 - 1e-12))
        gamma, loglik, _ = _posterior(residual, np.full(dx.shape, fit.sigma_b2), lam_dt, _law_logpdf(fit, residual), dt)
        gamma = np.where(valid, gamma, 0.0)
        if trace is not None:
            trace.append(float(np.sum(loglik[valid])))
        fit = fit_window(dx, mu, gamma, valid, dt, cfg.family, prev if prev is not None else fit, bounds, ratio)
    return fit


def _mixture_loglik(dx: np.ndarray, mu: np.ndarray, valid: np.ndarray, fit: WindowFit, dt: float) -> float:
    residual = dx - mu * dt
    lam_dt = np.full(dx.shape, min(fit.lam * dt, 1.0 - 1e-12))
    _, loglik, _ = _posterior(residual, np.full(dx.shape, fit.sigma_b2), lam_dt, _law_logpdf(fit, residual), dt)
    return float(np.sum(loglik[valid]))


def global_em(
    dx: np.ndarray,
    cfg: EmConfig,
    mu: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
) -> Tuple[WindowFit, List[float]]:
    """Whole-series EM initialisation; returns the fit and the log-likelihood per iteration.

    The trace holds the log-likelihood before the first iteration and after each one. The
    jump-variance floor is not applied here, so every iteration is a plain EM update.
    """
    dx = np.asarray(dx, dtype=float)
    mu = np.zeros_like(dx) if mu is None else np.broadcast_to(np.asarray(mu, dtype=float), dx.shape)
    valid = _valid_mask(dx, mask)
    fit = _initial_fit(dx, valid, cfg.dt, cfg.family, cfg.min_jump_ratio)
    trace: List[float] = []
    fit = _window_em(dx, mu, valid, fit, cfg.global_steps, cfg, (0, dx.size), None, 0.0, trace, min_jump_ratio=0.0)
    trace.append(_mixture_loglik(dx, mu, valid, fit, cfg.dt))
    return fit, trace


def jump_parameter_count(family: JumpFamily) -> int:
    """Free parameters the jump component adds to a pure diffusion (intensity included)."""
    if family is JumpFamily.GAUSSIAN:
        return 2
    if family is JumpFamily.DOUBLE_EXPONENTIAL:
        return 3
    return EMPIRICAL_BINS


def jump_evidence(
    dx: np.ndarray,
    mu: np.ndarray,
    fit: WindowFit,
    dt: float = 1.0,
    mask: Optional[np.ndarray] = None,
) -> float:
    """Log-likelihood gain of a fitted mixture over the best diffusion-only fit.

    The diffusion-only fit is the gaussian with variance mean((dx - mu dt)^2) / dt.
    """
    dx = np.asarray(dx, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), dx.shape)
    valid = _valid_mask(dx, mask)
    residual = (dx - mu * dt)[valid]
    if residual.size == 0:
        return 0.0
    sigma2 = max(float(np.mean(residual**2)) / dt, SIGMA2_FLOOR)
    diffusive = float(np.sum(stats.norm.logpdf(residual, scale=np.sqrt(sigma2 * dt))))
    return _mixture_loglik(dx, mu, valid, fit, dt) - diffusive


def jumps_supported(gain: float, n: int, family: JumpFamily) -> bool:
    """BIC check: the jump component must gain more than half its parameter count times log n."""
    return bool(gain > 0.5 * jump_parameter_count(family) * np.log(max(n, 2)))


def rolling_em(
    dx: np.ndarray,
    mu: np.ndarray,
    cfg: EmConfig,
    init: Optional[WindowFit] = None,
    previous: Optional[MixtureEstimates] = None,
    mask: Optional[np.ndarray] = None,
    jumps: bool = True,
) -> MixtureEstimates:
    """Rolling-window EM with 50% overlap.

    Each window starts from the matching window of `previous` when given, else from the
    previous window's fit (the first one from `init`). In causal mode the first window is
    initialised from its own increments only. With `jumps` False every window is a pure
    diffusion fit.
    """
    dx = np.asarray(dx, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), dx.shape)
    valid = _valid_mask(dx, mask)
    length = cfg.window_steps
    if length < MIN_WINDOW_STEPS:
        raise ConfigurationError("em.rolling_window", f"a window must contain at least {MIN_WINDOW_STEPS} steps, got {length}.")
    bounds = window_bounds(dx.size, length)
    fits: List[WindowFit] = []
    for k, (start, end) in enumerate(bounds):
        window = slice(start, end)
        if previous is not None and k < len(previous.jump_laws):
            seed_fit = WindowFit(
                float(previous.window_sigma_b2[k]),
                float(previous.window_lam[k]),
                float(previous.window_sJ2[k]),
                previous.jump_laws[k],
            )
        elif fits:
            seed_fit = fits[-1]
        elif init is not None and not cfg.causal:
            seed_fit = init
        else:
            seed_fit, _ = global_em(dx[window], cfg, mu[window], valid[window])
        fit = _window_em(
            dx[window],
            mu[window],
            valid[window],
            seed_fit,
            cfg.rolling_steps,
            cfg,
            (start, end),
            fits[-1] if fits else None,
            cfg.lambda_floor,
            jumps=jumps,
        )
        fits.append(fit)
    return assemble_estimates(fits, bounds, dx.size, cfg.dt, cfg.family, cfg.causal)


def enforce_rn_drift(
    x_hat: np.ndarray,
    est: MixtureEstimates,
    params: Optional[KernelParams] = None,
    half_life: float = 30.0,
) -> np.ndarray:
    """Risk-neutral drift along the filtered path, EWMA-smoothed and capped.

    The raw drift at increment u is kernel.rn_drift at x_hat[u] with the step's
    (sigma_b, lambda, jump law); it is smoothed causally with the given half-life and then
    clamped to the kernel's drift cap. Steps without an estimate get zero drift.

    Args:
        x_hat: Filtered logit path (one point more than the estimates).
        est: Mixture estimates per increment.
        params: Kernel rules (truncation radius, drift cap, S' floor).
        half_life: EWMA half-life in seconds.

    Returns:
        np.ndarray: Drift per increment (per second).
    """
    params = params or KernelParams.constant(0.0)
    x = np.asarray(x_hat, dtype=float)[: len(est)]
    sigma_b = np.sqrt(np.maximum(est.sigma_b2, 0.0))
    if est.family is JumpFamily.GAUSSIAN:
        compensation = gaussian_compensation(x, np.sqrt(np.maximum(np.nan_to_num(est.sJ2), 0.0)))
    else:
        compensation = np.zeros_like(x)
        for window, law in enumerate(est.jump_laws):
            rows = est.law_index == window
            if np.any(rows):
                compensation[rows] = jump_compensation(
                    x[rows],
                    law,
                    n_draws=params.compensation_draws,
                    seed=params.compensation_seed,
                    radius=params.truncation_radius,
                )
    raw = rn_drift(x, sigma_b, est.lam, est.jump_laws[0] if est.jump_laws else JumpLaw(), params, clamp=False, compensation=compensation)
    smoothed = ewma(raw, half_life, est.dt)
    return np.nan_to_num(np.clip(smoothed, -params.drift_cap, params.drift_cap))


def sanity_report(
    x_hat: np.ndarray,
    est: MixtureEstimates,
    resp: Responsibilities,
    converged: bool,
    loops: int,
    change: float,
) -> SanityReport:
    """Compare realised p-variance with the diffusive integral plus flagged jump moves."""
    p = sigmoid(x_hat)
    dp = np.diff(p)
    _, sprime, _ = logistic_maps(x_hat[:-1])
    usable = est.valid & np.isfinite(dp)
    flags = resp.jump_flags & usable
    realized = float(np.sum(dp[usable] ** 2))
    model = float(np.sum(sprime[usable] ** 2 * est.sigma_b2[usable] * est.dt) + np.sum(dp[flags] ** 2))
    return SanityReport(
        realized_p_variance=realized,
        model_p_variance=model,
        ratio=realized / model if model > 0 else float("nan"),
        converged=converged,
        outer_loops_used=loops,
        max_relative_change=change,
        n_flagged_jumps=int(flags.sum()),
    )


def _increment_mask(halted: np.ndarray) -> np.ndarray:
    return ~(halted[1:] | halted[:-1])


def calibrate(
    filter_out: FilterOutput,
    cfg: EmConfig,
    params: Optional[KernelParams] = None,
) -> CalibrationResult:
    """Full calibration loop: global EM, rolling EM, drift enforcement and re-smoothing.

    Args:
        filter_out: The first filter pass.
        cfg: EM settings.
        params: Kernel rules used by the drift (truncation radius, cap, S' floor).

    Returns:
        CalibrationResult: Estimates, responsibilities, drift, refreshed filter output and
        the sanity report. When the outer loops run out before the change drops below
        `cfg.tol`, the last estimates are returned with `sanity.converged` False.
    """
    start = time.perf_counter()
    smoothed = not cfg.causal
    mask = _increment_mask(filter_out.halted)
    dx = np.diff(filter_out.path(smoothed))
    n = dx.size
    if n < MIN_WINDOW_STEPS:
        raise InsufficientDataError("Calibration", n, MIN_WINDOW_STEPS)
    if n < 10 * cfg.window_steps:
        logger.info("Series has %d increments, fewer than 10 rolling windows of %d.", n, cfg.window_steps)

    mu = np.zeros(n)
    init, trace, jumps = None, [], True
    if not cfg.causal:
        init, trace = global_em(dx, cfg, mu, mask)
        if cfg.jump_test:
            gain = jump_evidence(dx, mu, init, cfg.dt, mask)
            jumps = jumps_supported(gain, int(_valid_mask(dx, mask).sum()), cfg.family)
            if not jumps:
                logger.info("Jump component gains %.2f log-likelihood, below its BIC penalty; fitting a pure diffusion.", gain)
                init = diffusive_fit(dx, mu, _valid_mask(dx, mask), cfg.dt, cfg.family, None, (0, n))
        # The first rolling pass already uses the drift implied by the global fit.
        start_est = assemble_estimates([init], [(0, n)], n, cfg.dt, cfg.family, causal=False)
        mu = enforce_rn_drift(filter_out.path(smoothed), start_est, params, cfg.drift_half_life)
    est = rolling_em(dx, mu, cfg, init=init, mask=mask, jumps=jumps)

    history: List[float] = []
    converged = False
    loops = 0
    for loops in range(1, cfg.outer_loops + 1):
        mu = enforce_rn_drift(filter_out.path(smoothed), est, params, cfg.drift_half_life)
        filter_out = rerun_smoother(filter_out, mu)
        dx = np.diff(filter_out.path(smoothed))
        refreshed = rolling_em(dx, mu, cfg, previous=est, mask=mask, jumps=jumps)
        change = refreshed.relative_change(est)
        history.append(change)
        est = refreshed
        logger.info("Outer loop %d: relative change %.3g.", loops, change)
        if change < cfg.tol:
            converged = True
            break
    if not converged:
        logger.warning("Calibration did not reach tol=%.3g in %d outer loops; returning the last estimates.", cfg.tol, cfg.outer_loops)

    mu = enforce_rn_drift(filter_out.path(smoothed), est, params, cfg.drift_half_life)
    resp = e_step(dx, mu, est, cfg.tau_J, cfg.lambda_floor, mask)
    sanity = sanity_report(filter_out.path(smoothed), est, resp, converged, loops, history[-1] if history else float("inf"))
    logger.info(
        "Calibrated %d increments in %ss: %d flagged jumps, p-variance ratio %.3f.",
        n,
        time_elapsed(start),
        sanity.n_flagged_jumps,
        sanity.ratio,
    )
    return CalibrationResult(
        estimates=est,
        responsibilities=resp,
        drift=mu,
        filter_out=filter_out,
        sanity=sanity,
        history=history,
        loglik_trace=trace,
    )
