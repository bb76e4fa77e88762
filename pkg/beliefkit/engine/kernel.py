"""The kernel module implements the logit map, the risk-neutral drift and path simulation.

The state is the log-odds x of an event probability p = S(x). Its drift is pinned down
by requiring p to be a martingale, so the only free inputs are the belief volatility,
the jump intensity and the jump law.
"""
from typing import Optional, Tuple

import numpy as np
from scipy import special

from ..config import logger
from ..models import JumpFamily, JumpLaw, KernelParams, LogitPath
from ..models.errors import StepSizeError, UnsupportedJumpFamilyError

X_CLAMP = 30.0
HERMITE_NODES = 64
LAGUERRE_NODES = 64

_hermite_x, _hermite_w = np.polynomial.hermite_e.hermegauss(HERMITE_NODES)
_hermite_w = _hermite_w / np.sqrt(2.0 * np.pi)
_laguerre_x, _laguerre_w = special.roots_laguerre(LAGUERRE_NODES)


def sigmoid(x):
    """S(x) = 1 / (1 + e^{-x}) with x clamped to [-30, 30]."""
    return special.expit(np.clip(x, -X_CLAMP, X_CLAMP))


def logit(p):
    """Inverse of the logistic map for p in (0, 1)."""
    return special.logit(p)


def logistic_maps(x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (p, S'(x), S''(x)) for logit x.

    S' = S(x) S(-x) and S'' = -S' tanh(x / 2), so S' is exactly even and S'' exactly odd in x.
    """
    x = np.clip(np.asarray(x, dtype=float), -X_CLAMP, X_CLAMP)
    p = special.expit(x)
    sprime = p * special.expit(-x)
    return p, sprime, -sprime * np.tanh(0.5 * x)


def _expected_sigmoid_gaussian(x: np.ndarray, sd) -> np.ndarray:
    """E[S(x + Z)] for Z ~ N(0, sd^2) by Gauss-Hermite quadrature; sd may vary with x."""
    x = np.asarray(x, dtype=float)
    sd = np.broadcast_to(np.asarray(sd, dtype=float), x.shape)
    return sigmoid(x[..., None] + sd[..., None] * _hermite_x) @ _hermite_w


def _expected_sigmoid_double_exponential(x: np.ndarray, law: JumpLaw) -> np.ndarray:
    """E[S(x + Z)] for the centred double-exponential law by Gauss-Laguerre quadrature."""
    x = np.asarray(x, dtype=float)
    up = sigmoid(x[..., None] + _laguerre_x / law.eta_up) @ _laguerre_w
    down = sigmoid(x[..., None] - _laguerre_x / law.eta_down) @ _laguerre_w
    return law.p_up * up + (1.0 - law.p_up) * down


def gaussian_compensation(x, sd) -> np.ndarray:
    """Jump compensation for centred gaussian jumps with a per-point standard deviation."""
    x = np.clip(np.asarray(x, dtype=float), -X_CLAMP, X_CLAMP)
    sd = np.broadcast_to(np.asarray(sd, dtype=float), x.shape)

    def _raw(z):
        return _expected_sigmoid_gaussian(z, sd) - sigmoid(z)

    return 0.5 * (_raw(x) - _raw(-x))


def _jump_draws(law: JumpLaw, n_draws: int, seed: int) -> np.ndarray:
    return law.sample(np.random.default_rng(seed), n_draws)


def jump_compensation(
    x,
    law: JumpLaw,
    n_draws: int = 600,
    seed: int = 0,
    radius: float = 1.0,
    method: Optional[str] = None,
) -> np.ndarray:
    """Estimate E[S(x+Z) - S(x) - S'(x) chi(Z)] for the given jump law.

    Gaussian laws use Gauss-Hermite quadrature and double-exponential laws Gauss-Laguerre
    quadrature by default; empirical bins, or `method="mc"`, use `n_draws` seeded draws.

    Args:
        x: Logit value(s).
        law: The jump law.
        n_draws: Draws for the Monte Carlo path.
        seed: Seed for the Monte Carlo path.
        radius: Truncation radius of chi.
        method: "quadrature", "mc" or None for the family default.

    Returns:
        np.ndarray: The compensation at each x.
    """
    x = np.clip(np.asarray(x, dtype=float), -X_CLAMP, X_CLAMP)
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    if law.is_degenerate:
        return np.zeros_like(x)
    if method is None:
        method = "mc" if law.family is JumpFamily.EMPIRICAL_BINS else "quadrature"
    raw = _raw_compensation(x, law, n_draws, seed, radius, method)
    if law.is_symmetric:
        # J is odd in x for symmetric laws; averaging with -J(-x) makes that exact.
        return 0.5 * (raw - _raw_compensation(-x, law, n_draws, seed, radius, method))
    return raw


def _raw_compensation(x: np.ndarray, law: JumpLaw, n_draws: int, seed: int, radius: float, method: str) -> np.ndarray:
    p, sprime, _ = logistic_maps(x)
    if method == "mc":
        z = _jump_draws(law, n_draws, seed)
        chi = np.where(np.abs(z) < radius, z, 0.0)
        values = sigmoid(x[..., None] + z) - p[..., None] - sprime[..., None] * chi
        return values.mean(axis=-1)
    if law.family is JumpFamily.GAUSSIAN:
        expected = _expected_sigmoid_gaussian(x, law.sd)
    elif law.family is JumpFamily.DOUBLE_EXPONENTIAL:
        expected = _expected_sigmoid_double_exponential(x, law)
    else:
        raise UnsupportedJumpFamilyError(law.family.value, "quadrature jump compensation")
    return expected - p - sprime * law.truncated_mean(radius)


def jump_p_second_moment(x, law: JumpLaw, n_draws: int = 600, seed: int = 0, method: Optional[str] = None) -> np.ndarray:
    """E[(S(x+Z) - S(x))^2] with the same quadrature/MC rules as the compensation."""
    x = np.clip(np.asarray(x, dtype=float), -X_CLAMP, X_CLAMP)
    p = sigmoid(x)
    if law.is_degenerate:
        return np.zeros_like(x)
    if method is None:
        method = "mc" if law.family is JumpFamily.EMPIRICAL_BINS else "quadrature"
    if method == "mc":
        z = _jump_draws(law, n_draws, seed)
        return np.mean((sigmoid(x[..., None] + z) - p[..., None]) ** 2, axis=-1)
    if law.family is JumpFamily.GAUSSIAN:
        return (sigmoid(x[..., None] + law.sd * _hermite_x) - p[..., None]) ** 2 @ _hermite_w
    if law.family is JumpFamily.DOUBLE_EXPONENTIAL:
        up = (sigmoid(x[..., None] + _laguerre_x / law.eta_up) - p[..., None]) ** 2 @ _laguerre_w
        down = (sigmoid(x[..., None] - _laguerre_x / law.eta_down) - p[..., None]) ** 2 @ _laguerre_w
        return law.p_up * up + (1.0 - law.p_up) * down
    raise UnsupportedJumpFamilyError(law.family.value, "quadrature jump moments")


def rn_drift(
    x,
    sigma_b,
    lam,
    law: JumpLaw,
    params: KernelParams,
    clamp: bool = True,
    compensation: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Risk-neutral logit drift that makes S(x) a martingale.

    mu = -(S''(x) sigma_b^2 / 2 + lambda * J(x)) / max(S'(x), floor), clamped to
    +-drift_cap when `clamp` is set.
    """
    x = np.asarray(x, dtype=float)
    _, sprime, ssecond = logistic_maps(x)
    if compensation is None:
        compensation = jump_compensation(
            x,
            law,
            n_draws=params.compensation_draws,
            seed=params.compensation_seed,
            radius=params.truncation_radius,
        )
    lam = np.asarray(lam, dtype=float)
    jump_term = np.where(lam > 0, lam * compensation, 0.0)
    mu = -(0.5 * ssecond * np.asarray(sigma_b, dtype=float) ** 2 + jump_term) / np.maximum(sprime, params.sprime_floor)
    if clamp:
        mu = np.clip(mu, -params.drift_cap, params.drift_cap)
    return mu


def _check_step_size(rates: np.ndarray, dt: float) -> None:
    max_rate = float(np.max(rates)) if rates.size else 0.0
    if max_rate * dt >= 1.0:
        raise StepSizeError(max_rate, dt)
    if max_rate * dt > 0.1:
        logger.warning("lambda * dt = %.3f exceeds 0.1; jump thinning is coarse at this step.", max_rate * dt)


def simulate_ensemble(
    params: KernelParams,
    p0: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    start_step: int = 0,
    schedule: Optional[np.ndarray] = None,
    antithetic: bool = False,
    drift_overlay: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate an ensemble of RN-consistent logit paths with the grid step of `params`.

    Args:
        params: Kernel parameters; grid step u of the simulation uses entry start_step + u.
        p0: Initial probability.
        n_steps: Number of Euler steps.
        n_paths: Number of paths.
        seed: Seed of the ensemble.
        start_step: Offset into the parameter grids.
        schedule: Optional intensity multiplier per simulated step.
        antithetic: Pair path k with path k + n_paths/2 through a negated Brownian driver
            and shared jump draws.
        drift_overlay: Optional extra deterministic drift per step, added on top of the
            RN drift (used for scenario shaping only).

    Returns:
        Tuple of arrays (x, jump_marks, jump_sizes) with shapes (n_paths, n_steps + 1).
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"p0 must lie in (0, 1), got {p0}")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic ensembles need an even number of paths")
    dt = params.dt
    steps = start_step + np.arange(n_steps)
    sigma = params.sigma_at(steps)
    mult = np.ones(n_steps) if schedule is None else np.asarray(schedule, dtype=float)[:n_steps]
    rates = params.lambda_at(steps) * mult
    _check_step_size(rates, dt)

    law = params.jump_law
    small_jump_mean = 0.0 if law.is_degenerate else law.truncated_mean(params.truncation_radius)
    rng = np.random.default_rng(seed)
    n_draw = n_paths // 2 if antithetic else n_paths

    x = np.empty((n_paths, n_steps + 1))
    marks = np.zeros((n_paths, n_steps + 1), dtype=bool)
    sizes = np.zeros((n_paths, n_steps + 1))
    x[:, 0] = np.clip(logit(p0), -X_CLAMP, X_CLAMP)
    sqrt_dt = np.sqrt(dt)
    for u in range(n_steps):
        xi = rng.standard_normal(n_draw)
        hit = rng.random(n_draw) < rates[u] * dt
        jumps = np.where(hit, law.sample(rng, n_draw), 0.0) if rates[u] > 0 else np.zeros(n_draw)
        if antithetic:
            xi = np.concatenate([xi, -xi])
            jumps = np.concatenate([jumps, jumps])
        mu = rn_drift(x[:, u], sigma[u], rates[u], law, params)
        step = (mu - rates[u] * small_jump_mean) * dt + sigma[u] * sqrt_dt * xi + jumps
        if drift_overlay is not None:
            step = step + drift_overlay[u] * dt
        x[:, u + 1] = np.clip(x[:, u] + step, -X_CLAMP, X_CLAMP)
        marks[:, u + 1] = jumps != 0.0
        sizes[:, u + 1] = jumps
    return x, marks, sizes


def simulate_path(
    params: KernelParams,
    p0: float,
    n_steps: int,
    dt: Optional[float] = None,
    seed: int = 0,
    schedule: Optional[np.ndarray] = None,
    drift_overlay: Optional[np.ndarray] = None,
) -> LogitPath:
    """Simulate one RN-consistent logit path by Euler-Maruyama with Bernoulli jump thinning.

    Args:
        params: Kernel parameters.
        p0: Initial probability in (0, 1).
        n_steps: Number of steps.
        dt: Step in seconds; defaults to the parameter grid step.
        seed: Seed of the path.
        schedule: Optional intensity multiplier per step.
        drift_overlay: Optional extra drift per step (scenario shaping).

    Returns:
        LogitPath: The simulated path.
    """
    if dt is not None and dt != params.dt:
        params = params.model_copy(update={"dt": dt})
    x, marks, sizes = simulate_ensemble(
        params, p0, n_steps, 1, seed, schedule=schedule, drift_overlay=drift_overlay
    )
    return LogitPath(
        t=np.arange(n_steps + 1) * params.dt,
        x=x[0],
        jump_marks=marks[0],
        jump_sizes=sizes[0],
        seed=seed,
    )
