"""The pide module solves the backward pricing equation of the logit jump-diffusion.

The value function V(t, x) of a payoff g(x_T), optionally with an accrual rate a(x) and an
absorbing barrier, satisfies

    V_t + mu V_x + sigma^2 / 2 V_xx + lambda * int [V(x+z) - V(x) - chi(z) V_x] f(z) dz + a = 0.

Diffusion and advection are stepped implicitly with a tridiagonal solve; the jump
integral is explicit, a discrete convolution of the previous slice with the jump density.
"""
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import interpolate, linalg

from ..config import logger
from ..models import (
    Direction,
    FirstPassageSpec,
    GridRefinementError,
    JumpFamily,
    JumpLaw,
    KernelParams,
    PIDEGrid,
    PriceResult,
    PricingMethod,
)
from .kernel import X_CLAMP, jump_compensation, jump_p_second_moment, logistic_maps, logit, rn_drift

CFL_LIMIT = 0.5


class PIDESolution(NamedTuple):
    """Price at (t0, x0) with the value function at t0."""

    price: PriceResult
    x: np.ndarray
    values: np.ndarray


def jump_support(law: JumpLaw) -> float:
    """Half-width of the jump sizes the convolution has to cover."""
    if law.is_degenerate:
        return 0.0
    if law.family is JumpFamily.GAUSSIAN:
        return 8.0 * law.sd
    if law.family is JumpFamily.DOUBLE_EXPONENTIAL:
        return 25.0 / min(law.eta_up, law.eta_down)
    return float(np.max(np.abs(law.edges)))


def default_grid(
    x0: float,
    params: KernelParams,
    t0: float,
    T: float,
    n_x: int = 256,
    n_t: int = 128,
    barrier: Optional[FirstPassageSpec] = None,
) -> PIDEGrid:
    """Domain x0 +- 6 sigma sqrt(T - t0), widened by three jump standard deviations.

    With a barrier the domain ends at the barrier on the hit side.
    """
    sigma = float(np.max(params.sigma_b))
    jump_sd = float(np.sqrt(params.jump_law.second_moment)) if np.max(params.lam) > 0 else 0.0
    half_width = max(6.0 * sigma * np.sqrt(T - t0) + 3.0 * jump_sd, 1.0)
    x_min = max(x0 - half_width, -X_CLAMP)
    x_max = min(x0 + half_width, X_CLAMP)
    if barrier is not None:
        x_h = float(logit(barrier.level))
        if barrier.direction is Direction.HIT_ABOVE:
            x_max = x_h
            x_min = min(x_min, x_h - 1.0)
        else:
            x_min = x_h
            x_max = max(x_max, x_h + 1.0)
    return PIDEGrid(x_min=x_min, x_max=x_max, n_x=n_x, n_t=n_t)


def _jump_weights(law: JumpLaw, dx: float):
    """Offsets (in nodes) and probabilities of the discretised jump law."""
    support = jump_support(law)
    k = max(int(np.ceil(support / dx)), 1)
    offsets = np.arange(-k, k + 1)
    z = offsets * dx
    edges = np.concatenate([z - 0.5 * dx, [z[-1] + 0.5 * dx]])
    mass = np.diff(law.cdf(edges))
    total = mass.sum()
    if total <= 0:
        return offsets, np.zeros_like(z), z
    return offsets, mass / total, z


class _Boundary:
    """Values outside the grid, used by Dirichlet rows and the jump convolution."""

    def __init__(self, terminal: Callable, accrual: Optional[Callable], barrier: Optional[FirstPassageSpec]):
        self.terminal = terminal
        self.accrual = accrual
        self.barrier = barrier
        self.x_h = float(logit(barrier.level)) if barrier is not None else None

    def __call__(self, x: np.ndarray, remaining: float, sigma: float = 0.0, lam: float = 0.0) -> np.ndarray:
        if self.barrier is not None:
            beyond = x >= self.x_h if self.barrier.direction is Direction.HIT_ABOVE else x <= self.x_h
            return np.where(beyond, self.barrier.payout, 0.0)
        value = np.asarray(self.terminal(x), dtype=float)
        if self.accrual is not None:
            value = value + self.accrual(x, sigma, lam) * remaining
        return value


def _solve_once(
    terminal: Callable,
    params: KernelParams,
    x0: float,
    t0: float,
    T: float,
    grid: PIDEGrid,
    accrual: Optional[Callable],
    barrier: Optional[FirstPassageSpec],
):
    x = np.linspace(grid.x_min, grid.x_max, grid.n_x)
    dx = grid.dx
    dt = (T - t0) / grid.n_t
    steps = np.floor((t0 + dt * np.arange(grid.n_t)) / params.dt).astype(int)
    rates = params.lambda_at(steps)
    if np.max(rates) * dt > CFL_LIMIT:
        raise GridRefinementError(float(np.max(rates)), dt)

    law = params.jump_law
    has_jumps = np.max(rates) > 0 and not law.is_degenerate
    boundary = _Boundary(terminal, accrual, barrier)
    if has_jumps:
        offsets, weights, z = _jump_weights(law, dx)
        chi_mean = float(np.sum(weights * np.where(np.abs(z) < params.truncation_radius, z, 0.0)))
        pad = int(offsets[-1])
        left = grid.x_min - dx * np.arange(pad, 0, -1)
        right = grid.x_max + dx * np.arange(1, pad + 1)
        compensation = jump_compensation(
            x, law, params.compensation_draws, params.compensation_seed, params.truncation_radius
        )
    else:
        chi_mean, compensation = 0.0, np.zeros_like(x)
    values = boundary(x, 0.0) if barrier is not None else np.asarray(terminal(x), dtype=float)
    absorbed = boundary(x, 0.0) > 0 if barrier is not None else None
    theta = grid.theta
    upwind_nodes = 0
    for n in range(grid.n_t - 1, -1, -1):
        sigma = float(params.sigma_at(steps[n]))
        lam = float(rates[n])
        mu = rn_drift(x, sigma, lam, law, params, compensation=compensation) - lam * chi_mean
        diffusion = 0.5 * sigma**2 / dx**2
        # Central advection where the cell Peclet number allows it, upwind elsewhere.
        central = np.abs(mu) * dx <= sigma**2
        lower = np.where(central, diffusion - mu / (2 * dx), diffusion + np.maximum(-mu, 0.0) / dx)
        upper = np.where(central, diffusion + mu / (2 * dx), diffusion + np.maximum(mu, 0.0) / dx)
        diag = -(lower + upper)
        upwind_nodes = max(upwind_nodes, int(np.count_nonzero(~central[1:-1])))

        operator_prev = diag * values
        operator_prev[1:] += lower[1:] * values[:-1]
        operator_prev[:-1] += upper[:-1] * values[1:]
        rhs = values + dt * (1.0 - theta) * operator_prev
        if accrual is not None:
            rhs = rhs + dt * accrual(x, sigma, lam)
        if has_jumps and lam > 0:
            remaining = T - (t0 + dt * (n + 1))
            extended = np.concatenate(
                [boundary(left, remaining, sigma, lam), values, boundary(right, remaining, sigma, lam)]
            )
            expected = np.convolve(extended, weights[::-1], mode="valid")
            rhs = rhs + dt * lam * (expected - values)

        banded = np.zeros((3, grid.n_x))
        banded[0, 1:] = -dt * theta * upper[:-1]
        banded[1] = 1.0 - dt * theta * diag
        banded[2, :-1] = -dt * theta * lower[1:]
        remaining_now = T - (t0 + dt * n)
        edge_values = boundary(x[[0, -1]], remaining_now, sigma, lam)
        banded[1, 0], banded[0, 1] = 1.0, 0.0
        banded[1, -1], banded[2, -2] = 1.0, 0.0
        rhs[0], rhs[-1] = edge_values
        values = linalg.solve_banded((1, 1), banded, rhs)
        if barrier is not None:
            values = np.where(absorbed, barrier.payout, values)
    if upwind_nodes:
        logger.warning(
            "Central advection is not monotone at up to %d interior node(s); upwind differences were used there.",
            upwind_nodes,
        )
    value = float(interpolate.CubicSpline(x, values)(np.clip(x0, x[0], x[-1])))
    return value, x, values


def pide_solve(
    terminal: Callable,
    params: KernelParams,
    x0: float,
    t0: float,
    T: float,
    grid: Optional[PIDEGrid] = None,
    accrual: Optional[Callable] = None,
    barrier: Optional[FirstPassageSpec] = None,
    richardson: bool = True,
) -> PIDESolution:
    """Backward IMEX solve of the pricing equation.

    Args:
        terminal: Payoff g(x) at expiry, vectorised over x.
        params: Kernel parameters; grid entries apply by clock time.
        x0: Current logit.
        t0: Valuation time in seconds.
        T: Expiry in seconds.
        grid: Space-time grid; None uses `default_grid`.
        accrual: Optional accrual rate a(x, sigma, lambda) per second (variance and corridor contracts).
        barrier: Optional first-passage barrier; the value is the payout at and beyond it.
        richardson: Also solve on the half-resolution grid for the error estimate.

    Returns:
        PIDESolution: The price with a Richardson error from a half-resolution solve and
        the value function at t0.

    Raises:
        GridRefinementError: lambda * dt_grid exceeds 0.5.
    """
    if T <= t0:
        raise ValueError(f"T must exceed t0, got t0={t0}, T={T}")
    grid = grid or default_grid(x0, params, t0, T, barrier=barrier)
    value, x, values = _solve_once(terminal, params, x0, t0, T, grid, accrual, barrier)
    error = 0.0
    if richardson:
        coarse, _, _ = _solve_once(terminal, params, x0, t0, T, grid.halved(), accrual, barrier)
        error = abs(value - coarse)
    price = PriceResult(
        value=value,
        error=error,
        method=PricingMethod.PIDE,
        details={"x_min": grid.x_min, "x_max": grid.x_max, "n_x": grid.n_x, "n_t": grid.n_t},
    )
    return PIDESolution(price=price, x=x, values=values)


def x_variance_rate(law: JumpLaw) -> Callable:
    """Accrual rate of logit quadratic variation, sigma^2 + lambda E[Z^2]."""
    second_moment = 0.0 if law.is_degenerate else law.second_moment

    def _rate(x, sigma, lam):
        return np.full(np.shape(x), sigma**2 + lam * second_moment)

    return _rate


def p_variance_rate(params: KernelParams, corridor=None) -> Callable:
    """Accrual rate of probability quadratic variation, optionally gated by a corridor in p."""

    def _rate(x, sigma, lam):
        x = np.asarray(x, dtype=float)
        p, sprime, _ = logistic_maps(x)
        rate = sprime**2 * sigma**2
        if lam > 0:
            rate = rate + lam * jump_p_second_moment(
                x, params.jump_law, params.compensation_draws, params.compensation_seed
            )
        if corridor is not None:
            rate = np.where((p >= corridor[0]) & (p <= corridor[1]), rate, 0.0)
        return rate

    return _rate
