"""The montecarlo module prices path functionals on simulated RN-consistent logit ensembles."""
from typing import NamedTuple, Optional

import numpy as np

from ..models import (
    Direction,
    FirstPassageSpec,
    KernelParams,
    PayoffKind,
    PayoffSpec,
    PriceResult,
    PricingMethod,
    VarianceSpace,
)
from .kernel import logit, sigmoid, simulate_ensemble

MIN_PATHS = 1000


class Ensemble(NamedTuple):
    """Simulated paths shared by every payoff of one pricing run."""

    x: np.ndarray
    sigma: np.ndarray
    dt: float
    antithetic: bool


def simulate(
    params: KernelParams,
    x0: float,
    t0: float,
    T: float,
    n_paths: int,
    seed: int,
    antithetic: bool = True,
) -> Ensemble:
    """Simulate the ensemble on the parameter grid from t0 to T."""
    if n_paths < MIN_PATHS:
        raise ValueError(f"n_paths must be at least {MIN_PATHS}, got {n_paths}")
    if antithetic and n_paths % 2:
        n_paths += 1
    start = int(np.floor(t0 / params.dt))
    n_steps = max(int(round((T - t0) / params.dt)), 1)
    x, _, _ = simulate_ensemble(
        params, float(sigmoid(x0)), n_steps, n_paths, seed, start_step=start, antithetic=antithetic
    )
    return Ensemble(x=x, sigma=params.sigma_at(start + np.arange(n_steps)), dt=params.dt, antithetic=antithetic)


def crossing_probability(
    x: np.ndarray,
    barrier: FirstPassageSpec,
    sigma: np.ndarray,
    dt: float,
    bridge: bool = True,
) -> np.ndarray:
    """Probability per path that the barrier is reached before expiry.

    Any monitoring date at or beyond the barrier counts as a hit, including the start and
    jump overshoots. With the bridge correction, a diffusive crossing between two dates on
    the same side is added with probability exp(-2 (b - x_u)(b - x_{u+1}) / (sigma^2 dt)).
    """
    b = float(logit(barrier.level))
    above = barrier.direction is Direction.HIT_ABOVE
    hit = np.any(x >= b if above else x <= b, axis=1)
    if not bridge:
        return hit.astype(float)
    gap_now = np.abs(b - x[:, :-1])
    gap_next = np.abs(b - x[:, 1:])
    variance = (np.asarray(sigma, dtype=float) ** 2 * dt)[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cross = np.where(variance > 0, np.exp(-2.0 * gap_now * gap_next / variance), 0.0)
    survive = np.prod(1.0 - np.clip(cross, 0.0, 1.0), axis=1)
    return np.where(hit, 1.0, 1.0 - survive)


def payoff_values(spec: PayoffSpec, ensemble: Ensemble, t0: float, T: float, bridge: bool = True) -> np.ndarray:
    """Payoff of every simulated path."""
    x = ensemble.x
    p = sigmoid(x)
    kind = spec.kind
    if kind is PayoffKind.VANILLA:
        return p[:, -1]
    if kind is PayoffKind.DIGITAL:
        return (x[:, -1] > spec.strike_x).astype(float)
    if kind is PayoffKind.CONSTANT:
        return np.ones(x.shape[0])
    if kind is PayoffKind.FIRST_PASSAGE:
        return spec.payout * crossing_probability(x, spec.barrier(t0, T), ensemble.sigma, ensemble.dt, bridge)
    path = x if spec.space is VarianceSpace.LOGIT else p
    increments = np.diff(path, axis=1) ** 2
    if kind is PayoffKind.CORRIDOR:
        lo, hi = spec.corridor
        gate = (p[:, :-1] >= lo) & (p[:, :-1] <= hi)
        return np.sum(np.where(gate, increments, 0.0), axis=1)
    variance = np.sum(increments, axis=1)
    if kind is PayoffKind.VOL_SWAP:
        return np.sqrt(variance)
    return variance


def estimate(values: np.ndarray, antithetic: bool) -> PriceResult:
    """Mean and standard error; antithetic pairs are averaged before the error."""
    if antithetic:
        half = values.size // 2
        values = 0.5 * (values[:half] + values[half:])
    error = float(np.std(values, ddof=1) / np.sqrt(values.size))
    return PriceResult(value=float(np.mean(values)), error=error, method=PricingMethod.MC, details={"n": int(values.size)})


def mc_price(
    spec: PayoffSpec,
    params: KernelParams,
    x0: float,
    t0: float,
    T: float,
    n_paths: int = 20000,
    seed: int = 0,
    antithetic: bool = True,
    bridge: bool = True,
    ensemble: Optional[Ensemble] = None,
) -> PriceResult:
    """Monte Carlo price of one payoff.

    Args:
        spec: Payoff to price.
        params: Kernel parameters.
        x0: Current logit.
        t0: Valuation time in seconds.
        T: Expiry in seconds.
        n_paths: Paths to simulate.
        seed: Seed of the ensemble.
        antithetic: Pair paths through a negated Brownian driver.
        bridge: Brownian-bridge crossing correction for first passage.
        ensemble: Reuse an ensemble already simulated with these inputs.

    Returns:
        PriceResult: Mean payoff and its standard error.
    """
    ensemble = ensemble or simulate(params, x0, t0, T, n_paths, seed, antithetic)
    return estimate(payoff_values(spec, ensemble, t0, T, bridge), ensemble.antithetic)
