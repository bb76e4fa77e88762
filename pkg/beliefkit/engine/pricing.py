"""The pricing module holds the closed-form strikes and dispatches instruments to PIDE and Monte Carlo."""
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..config import logger
from ..models import (
    CorrelationUndefinedError,
    KernelParams,
    PairDependence,
    PairState,
    PayoffKind,
    PayoffSpec,
    PIDEGrid,
    PriceResult,
    PricerConfig,
    PricingMethod,
    VarianceSpace,
)
from .greeks import greeks, vanilla_greeks
from .kernel import jump_p_second_moment, logistic_maps, sigmoid
from .montecarlo import mc_price, simulate
from .pide import default_grid, p_variance_rate, pide_solve, x_variance_rate

FROZEN_STATE_LIMIT = 0.5
CORRELATION_LABEL = "ratio of moments"


def x_var_strike(params: KernelParams, t0: float, T: float) -> PriceResult:
    """Fair logit-variance strike, the integral of sigma_b^2 + lambda E[Z^2] over [t0, T]."""
    if T <= t0:
        raise ValueError(f"T must exceed t0, got t0={t0}, T={T}")
    diffusive = params.integrate(params.sigma_b**2, t0, T)
    jumps = 0.0
    if not params.jump_law.is_degenerate:
        jumps = params.integrate(params.lam, t0, T) * params.jump_law.second_moment
    return PriceResult(
        value=diffusive + jumps,
        method=PricingMethod.CLOSED_FORM,
        details={"diffusive": diffusive, "jump": jumps},
    )


def p_var_strike(x0: float, params: KernelParams, t0: float, T: float) -> PriceResult:
    """Frozen-state probability-variance strike at x0.

    K = S'(x0)^2 int sigma_b^2 + int lambda E[(S(x0 + Z) - S(x0))^2], with the jump moment by
    the same quadrature or Monte Carlo rules as the jump compensation. A warning is logged
    when (T - t0) times the mean sigma_b^2 exceeds 0.5, where freezing the state is coarse.
    """
    if T <= t0:
        raise ValueError(f"T must exceed t0, got t0={t0}, T={T}")
    sigma2_integral = params.integrate(params.sigma_b**2, t0, T)
    if sigma2_integral > FROZEN_STATE_LIMIT:
        logger.warning(
            "Frozen-state p-variance strike over %.0f s accumulates %.3f logit variance; expect a biased strike.",
            T - t0,
            sigma2_integral,
        )
    _, sprime, _ = logistic_maps(x0)
    diffusive = float(sprime) ** 2 * sigma2_integral
    jumps = 0.0
    lam_integral = params.integrate(params.lam, t0, T)
    if lam_integral > 0:
        moment = jump_p_second_moment(x0, params.jump_law, params.compensation_draws, params.compensation_seed)
        jumps = lam_integral * float(moment)
    return PriceResult(
        value=diffusive + jumps,
        method=PricingMethod.CLOSED_FORM,
        details={"diffusive": diffusive, "jump": jumps},
    )


def covariance_strike(
    state: PairState,
    cojump: Optional[PairDependence],
    t0: float,
    T: float,
) -> PriceResult:
    """Frozen-state covariance strike of two event probabilities.

    K = S'_i S'_j sigma_i sigma_j rho (T - t0) + Lambda M2 (T - t0).
    """
    if T <= t0:
        raise ValueError(f"T must exceed t0, got t0={t0}, T={T}")
    _, sprime_i, _ = logistic_maps(state.x_i)
    _, sprime_j, _ = logistic_maps(state.x_j)
    span = T - t0
    diffusive = float(sprime_i * sprime_j) * state.sigma_i * state.sigma_j * state.rho * span
    jumps = 0.0 if cojump is None else cojump.cojump_intensity * cojump.cojump_m2 * span
    return PriceResult(
        value=diffusive + jumps,
        method=PricingMethod.CLOSED_FORM,
        details={"diffusive": diffusive, "jump": jumps},
    )


def correlation_strike(
    state: PairState,
    cojump: Optional[PairDependence],
    t0: float,
    T: float,
    params_i: Optional[KernelParams] = None,
    params_j: Optional[KernelParams] = None,
) -> PriceResult:
    """Correlation strike as the covariance strike over the marginal p-variance strikes.

    Marginals use the diffusive frozen-state term from the pair state, or the full
    p-variance strike when the kernel parameters of that leg are given.

    Raises:
        CorrelationUndefinedError: A marginal variance strike is zero.
    """
    covariance = covariance_strike(state, cojump, t0, T).value
    marginals = []
    for x, sigma, params in ((state.x_i, state.sigma_i, params_i), (state.x_j, state.sigma_j, params_j)):
        if params is not None:
            marginals.append(p_var_strike(x, params, t0, T).value)
        else:
            _, sprime, _ = logistic_maps(x)
            marginals.append(float(sprime) ** 2 * sigma**2 * (T - t0))
    if min(marginals) <= 0:
        raise CorrelationUndefinedError(marginals[0], marginals[1])
    value = covariance / np.sqrt(marginals[0] * marginals[1])
    return PriceResult(
        value=float(value),
        method=PricingMethod.CLOSED_FORM,
        label=CORRELATION_LABEL,
        details={"covariance": covariance, "marginal_i": marginals[0], "marginal_j": marginals[1]},
    )


def terminal_payoff(spec: PayoffSpec) -> Callable:
    """Terminal payoff g(x) of a PIDE-priceable instrument."""
    if spec.kind is PayoffKind.VANILLA:
        return sigmoid
    if spec.kind is PayoffKind.DIGITAL:
        return lambda x: (np.asarray(x) > spec.strike_x).astype(float)
    if spec.kind is PayoffKind.CONSTANT:
        return lambda x: np.ones(np.shape(x))
    return lambda x: np.zeros(np.shape(x))


def accrual_rate(spec: PayoffSpec, params: KernelParams) -> Optional[Callable]:
    """State-dependent accrual of variance and corridor contracts, None for the others."""
    if spec.kind is PayoffKind.VARIANCE:
        if spec.space is VarianceSpace.LOGIT:
            return x_variance_rate(params.jump_law)
        return p_variance_rate(params)
    if spec.kind is PayoffKind.CORRIDOR:
        if spec.space is VarianceSpace.LOGIT:
            base = x_variance_rate(params.jump_law)
            lo, hi = spec.corridor

            def _gated(x, sigma, lam):
                p = sigmoid(x)
                return np.where((p >= lo) & (p <= hi), base(x, sigma, lam), 0.0)

            return _gated
        return p_variance_rate(params, spec.corridor)
    return None


def pide_supported(spec: PayoffSpec) -> bool:
    return spec.kind is not PayoffKind.VOL_SWAP


def closed_form(spec: PayoffSpec, params: KernelParams, x0: float, t0: float, T: float) -> Optional[PriceResult]:
    """Closed-form price where one exists."""
    if spec.kind is PayoffKind.VANILLA:
        return PriceResult(value=float(sigmoid(x0)), method=PricingMethod.CLOSED_FORM)
    if spec.kind is PayoffKind.CONSTANT:
        return PriceResult(value=1.0, method=PricingMethod.CLOSED_FORM)
    if spec.kind is PayoffKind.VARIANCE:
        if spec.space is VarianceSpace.LOGIT:
            return x_var_strike(params, t0, T)
        return p_var_strike(x0, params, t0, T)
    return None


def pide_price(
    spec: PayoffSpec,
    params: KernelParams,
    x0: float,
    t0: float,
    T: float,
    n_x: int = 256,
    n_t: int = 128,
    richardson: bool = True,
    grid: Optional[PIDEGrid] = None,
) -> PriceResult:
    """PIDE price of one instrument."""
    barrier = spec.barrier(t0, T)
    grid = grid or default_grid(x0, params, t0, T, n_x, n_t, barrier)
    solution = pide_solve(
        terminal_payoff(spec),
        params,
        x0,
        t0,
        T,
        grid=grid,
        accrual=accrual_rate(spec, params),
        barrier=barrier,
        richardson=richardson,
    )
    return solution.price


def _greek_price_fn(
    spec: PayoffSpec, cfg: PricerConfig, base: KernelParams, x0: float, seed: int
) -> Callable[[float, KernelParams], float]:
    """Pricing callable for the Greeks; the PIDE grid is frozen at the base state."""
    if spec.kind is PayoffKind.VARIANCE:
        return lambda x, params: closed_form(spec, params, x, cfg.t0, cfg.T).value
    if pide_supported(spec):
        grid = default_grid(x0, base, cfg.t0, cfg.T, cfg.n_x, cfg.n_t, spec.barrier(cfg.t0, cfg.T))
        return lambda x, params: pide_price(
            spec, params, x, cfg.t0, cfg.T, richardson=False, grid=grid
        ).value
    return lambda x, params: mc_price(
        spec, params, x, cfg.t0, cfg.T, cfg.n_paths, seed, cfg.antithetic, cfg.bridge
    ).value


def price_instrument(
    spec: PayoffSpec,
    params: KernelParams,
    x0: float,
    cfg: PricerConfig,
    seed: int = 0,
    ensemble=None,
) -> Dict[str, Any]:
    """Price one instrument with its configured methods and attach its Greeks.

    Returns:
        Dict[str, Any]: The spec echo, one result per method and the Greeks.
    """
    results: List[PriceResult] = []
    exact = closed_form(spec, params, x0, cfg.t0, cfg.T)
    if exact is not None:
        results.append(exact)
    for method in spec.methods:
        if method is PricingMethod.PIDE and pide_supported(spec):
            results.append(pide_price(spec, params, x0, cfg.t0, cfg.T, cfg.n_x, cfg.n_t))
        elif method is PricingMethod.MC:
            results.append(
                mc_price(spec, params, x0, cfg.t0, cfg.T, cfg.n_paths, seed, cfg.antithetic, cfg.bridge, ensemble)
            )
        elif method is PricingMethod.CLOSED_FORM and exact is None:
            logger.warning("%s has no closed form; skipped.", spec.name)
    record: Dict[str, Any] = {
        "instrument": spec.model_dump(),
        "results": [result.model_dump() for result in results],
    }
    if cfg.greeks:
        if spec.kind is PayoffKind.VANILLA:
            sensitivities = vanilla_greeks(x0)
        else:
            sensitivities = greeks(_greek_price_fn(spec, cfg, params, x0, seed), x0, params, cfg.bumps)
        record["greeks"] = sensitivities.model_dump()
    return record


def price_instruments(cfg: PricerConfig, params: KernelParams, x0: float, seed: int = 0) -> List[Dict[str, Any]]:
    """Price every configured instrument; Monte Carlo legs share one ensemble."""
    needs_mc = any(PricingMethod.MC in spec.methods for spec in cfg.instruments)
    ensemble = simulate(params, x0, cfg.t0, cfg.T, cfg.n_paths, seed, cfg.antithetic) if needs_mc else None
    records = []
    for spec in cfg.instruments:
        logger.info("Pricing %s (%s).", spec.name, spec.kind.value)
        records.append(price_instrument(spec, params, x0, cfg, seed, ensemble))
    return records
