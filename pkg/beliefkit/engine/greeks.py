"""The greeks module computes logit-domain sensitivities by bump-and-revalue."""
from typing import Callable, Optional

import numpy as np

from ..models import BumpSizeError, GreekBumps, Greeks, KernelParams
from .kernel import logistic_maps

PriceFn = Callable[[float, KernelParams], float]


def vanilla_greeks(x: float) -> Greeks:
    """Closed-form Greeks of the contract paying S(x_T): delta S'(x), gamma S''(x), no vegas."""
    _, sprime, ssecond = logistic_maps(x)
    return Greeks(delta_x=float(sprime), gamma_x=float(ssecond), vega_b=0.0, jump_vega=0.0)


def _check_sigma(params: KernelParams, factor: float) -> None:
    if factor < 0 or np.any(params.sigma_b * factor < 0):
        raise BumpSizeError("sigma_rel", float(np.min(params.sigma_b)) * factor)


def greeks(
    price_fn: PriceFn,
    x0: float,
    params: KernelParams,
    bumps: Optional[GreekBumps] = None,
    rho_fn: Optional[Callable[[float], float]] = None,
    rho: Optional[float] = None,
) -> Greeks:
    """Finite-difference Greeks of any pricing operation.

    Args:
        price_fn: Maps (x0, params) to a price.
        x0: Current logit.
        params: Kernel parameters.
        bumps: Bump sizes; None uses the defaults.
        rho_fn: Maps a correlation to a price, for instruments that depend on one.
        rho: Correlation around which `rho_fn` is bumped.

    Returns:
        Greeks: delta_x and gamma_x by central differences in x, vega_b per unit of sigma_b,
        jump_vega per unit of the jump second moment, vega_rho when `rho_fn` is given.

    Raises:
        BumpSizeError: A bump leaves the valid parameter range.
    """
    bumps = bumps or GreekBumps()
    h = bumps.x
    if h <= 0:
        raise BumpSizeError("x", h)
    base = price_fn(x0, params)
    up, down = price_fn(x0 + h, params), price_fn(x0 - h, params)
    delta = (up - down) / (2.0 * h)
    gamma = (up - 2.0 * base + down) / h**2

    r = bumps.sigma_rel
    _check_sigma(params, 1.0 - r)
    sigma_mean = float(np.mean(params.sigma_b))
    if sigma_mean > 0:
        vega_up = price_fn(x0, params.with_sigma_scale(1.0 + r))
        vega_down = price_fn(x0, params.with_sigma_scale(1.0 - r))
        vega_b = (vega_up - vega_down) / (2.0 * r * sigma_mean)
    else:
        vega_b = 0.0

    s = bumps.jump_var_rel
    if not 0.0 < s < 1.0:
        raise BumpSizeError("jump_var_rel", s)
    jump_var = 0.0 if params.jump_law.is_degenerate else params.jump_law.second_moment
    if jump_var > 0 and np.max(params.lam) > 0:
        jump_up = price_fn(x0, params.with_jump_variance_scale(1.0 + s))
        jump_down = price_fn(x0, params.with_jump_variance_scale(1.0 - s))
        jump_vega = (jump_up - jump_down) / (2.0 * s * jump_var)
    else:
        jump_vega = 0.0

    vega_rho = None
    if rho_fn is not None:
        rho = 0.0 if rho is None else rho
        step = bumps.rho
        if abs(rho) + step > 1.0:
            raise BumpSizeError("rho", abs(rho) + step)
        vega_rho = (rho_fn(rho + step) - rho_fn(rho - step)) / (2.0 * step)
    return Greeks(delta_x=delta, gamma_x=gamma, vega_b=vega_b, vega_rho=vega_rho, jump_vega=jump_vega)
