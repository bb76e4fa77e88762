import numpy as np
import pytest

from beliefkit.engine.greeks import greeks, vanilla_greeks
from beliefkit.engine.kernel import logistic_maps, logit, sigmoid
from beliefkit.engine.montecarlo import mc_price
from beliefkit.engine.pide import default_grid, pide_solve
from beliefkit.engine.pricing import (
    closed_form,
    correlation_strike,
    covariance_strike,
    pide_price,
    pide_supported,
    price_instrument,
    p_var_strike,
    x_var_strike,
)
from beliefkit.models import (
    BumpSizeError,
    CorrelationUndefinedError,
    GreekBumps,
    JumpLaw,
    KernelParams,
    PairDependence,
    PairState,
    PayoffKind,
    PayoffSpec,
    PIDEGrid,
    PricerConfig,
    PricingMethod,
    VarianceSpace,
)

X0 = float(logit(0.4))
T = 600.0
PASSAGE_LEVEL = 0.7


@pytest.fixture
def jump_params():
    return KernelParams.constant(0.05, 0.001, JumpLaw.gaussian(0.5))


def test_vanilla_closed_form_is_current_probability(jump_params):
    spec = PayoffSpec(name="v", kind=PayoffKind.VANILLA)
    result = closed_form(spec, jump_params, X0, 0.0, T)
    assert result.method is PricingMethod.CLOSED_FORM
    assert result.value == pytest.approx(0.4)


def test_x_variance_strike(jump_params):
    result = x_var_strike(jump_params, 0.0, T)
    # sigma^2 T + lambda T E[Z^2]
    assert result.value == pytest.approx(0.0025 * 600 + 0.001 * 600 * 0.25)


def test_p_variance_strike_diffusive_term(jump_params):
    result = p_var_strike(X0, jump_params, 0.0, T)
    _, sprime, _ = logistic_maps(X0)
    assert result.details["diffusive"] == pytest.approx(float(sprime) ** 2 * 0.0025 * 600)
    assert result.details["jump"] > 0
    assert result.value == pytest.approx(result.details["diffusive"] + result.details["jump"])


def test_p_variance_strike_without_jumps_has_no_jump_term(diffusive_params):
    result = p_var_strike(0.0, diffusive_params, 0.0, 100.0)
    assert result.details["jump"] == 0.0
    assert result.value == pytest.approx(0.0625 * 0.0025 * 100)


def test_pide_vanilla_stays_a_martingale(diffusive_params):
    spec = PayoffSpec(name="v", kind=PayoffKind.VANILLA)
    result = pide_price(spec, diffusive_params, X0, 0.0, T)
    assert result.method is PricingMethod.PIDE
    assert result.value == pytest.approx(0.4, abs=2e-3)


def test_pide_solve_returns_the_value_function(diffusive_params):
    solution = pide_solve(sigmoid, diffusive_params, X0, 0.0, T, richardson=False)
    assert solution.price.value == pytest.approx(0.4, abs=2e-3)
    assert solution.price.error == 0.0
    assert solution.x.shape == solution.values.shape == (solution.price.details["n_x"],)
    assert np.interp(X0, solution.x, solution.values) == pytest.approx(0.4, abs=2e-3)


def test_pide_x_variance_matches_closed_form(jump_params):
    spec = PayoffSpec(name="xv", kind=PayoffKind.VARIANCE, space=VarianceSpace.LOGIT)
    result = pide_price(spec, jump_params, X0, 0.0, T)
    assert result.value == pytest.approx(x_var_strike(jump_params, 0.0, T).value, rel=1e-3)


def test_pide_digital_agrees_with_monte_carlo(jump_params):
    spec = PayoffSpec(name="d", kind=PayoffKind.DIGITAL, strike_x=0.0)
    pide = pide_price(spec, jump_params, X0, 0.0, T)
    mc = mc_price(spec, jump_params, X0, 0.0, T, n_paths=10000, seed=11)
    assert 0.0 < pide.value < 1.0
    assert abs(pide.value - mc.value) < max(0.01, 3.0 * (mc.error + pide.error))


def test_first_passage_exceeds_terminal_digital(diffusive_params):
    level = 0.5
    passage = PayoffSpec(name="fp", kind=PayoffKind.FIRST_PASSAGE, level=level)
    digital = PayoffSpec(name="d", kind=PayoffKind.DIGITAL, strike_x=float(logit(level)))
    hit = mc_price(passage, diffusive_params, X0, 0.0, T, n_paths=4000, seed=5)
    end = mc_price(digital, diffusive_params, X0, 0.0, T, n_paths=4000, seed=5)
    assert hit.value >= end.value


def _payoff(kind, **fields):
    return PayoffSpec(name=kind.value, kind=kind, **fields)


def test_complementary_payoffs_sum_to_the_constant(jump_params):
    grid = default_grid(X0, jump_params, 0.0, T)
    prices = [
        pide_solve(g, jump_params, X0, 0.0, T, grid=grid, richardson=False).price.value
        for g in (sigmoid, lambda x: 1.0 - sigmoid(x), lambda x: np.ones(np.shape(x)))
    ]
    assert prices[2] == pytest.approx(1.0, abs=1e-12)
    assert prices[0] + prices[1] == pytest.approx(prices[2], abs=1e-10)


@pytest.mark.parametrize("method", ["pide", "mc"])
def test_larger_payoffs_never_price_lower(jump_params, method):
    def price(spec):
        if method == "pide":
            return pide_price(spec, jump_params, X0, 0.0, T, richardson=False).value
        return mc_price(spec, jump_params, X0, 0.0, T, n_paths=4000, seed=21).value

    low, high = (_payoff(PayoffKind.DIGITAL, strike_x=strike) for strike in (0.5, 0.0))
    assert price(high) >= price(low)
    assert price(_payoff(PayoffKind.CONSTANT)) >= price(high)


def test_halving_the_grid_at_least_halves_the_vanilla_error(diffusive_params):
    base = default_grid(X0, diffusive_params, 0.0, T)
    fine = PIDEGrid(x_min=base.x_min, x_max=base.x_max, n_x=129, n_t=64)
    target = float(sigmoid(X0))
    errors = [
        abs(pide_solve(sigmoid, diffusive_params, X0, 0.0, T, grid=grid, richardson=False).price.value - target)
        for grid in (fine.halved(), fine)
    ]
    assert errors[1] <= 0.5 * errors[0]


@pytest.mark.parametrize(
    "spec",
    [
        PayoffSpec(name="pv", kind=PayoffKind.VARIANCE, space=VarianceSpace.PROBABILITY),
        PayoffSpec(name="fp", kind=PayoffKind.FIRST_PASSAGE, level=PASSAGE_LEVEL),
    ],
    ids=["p-variance", "first-passage"],
)
def test_pide_agrees_with_monte_carlo(jump_params, spec):
    pide = pide_price(spec, jump_params, X0, 0.0, T)
    mc = mc_price(spec, jump_params, X0, 0.0, T, n_paths=10000, seed=13)
    # One percentage point for the probability, one percent of the strike for the variance.
    floor = 0.01 if spec.kind is PayoffKind.FIRST_PASSAGE else 0.01 * mc.value
    assert pide.value > 0.0
    assert abs(pide.value - mc.value) < max(floor, 3.0 * (mc.error + pide.error))


@pytest.mark.parametrize("level, expected", [(0.3, 1.0), (0.5, 0.0)])
def test_first_passage_on_a_frozen_path(level, expected):
    frozen = KernelParams.constant(0.0)
    spec = _payoff(PayoffKind.FIRST_PASSAGE, level=level)
    result = mc_price(spec, frozen, X0, 0.0, 100.0, n_paths=1000, seed=1, antithetic=False)
    assert result.value == expected
    assert result.error == 0.0


def test_vol_swap_is_monte_carlo_only():
    assert not pide_supported(PayoffSpec(name="vs", kind=PayoffKind.VOL_SWAP))
    assert pide_supported(PayoffSpec(name="v", kind=PayoffKind.VANILLA))


def test_vanilla_greeks_closed_form():
    result = vanilla_greeks(0.0)
    assert result.delta_x == pytest.approx(0.25)
    assert result.gamma_x == pytest.approx(0.0)
    assert result.vega_b == 0.0 and result.jump_vega == 0.0


def test_pide_vanilla_delta_matches_logistic_slope(diffusive_params):
    spec = PayoffSpec(name="v", kind=PayoffKind.VANILLA)
    grid = default_grid(X0, diffusive_params, 0.0, T)
    result = greeks(
        lambda x, params: pide_price(spec, params, x, 0.0, T, richardson=False, grid=grid).value,
        X0,
        diffusive_params,
    )
    _, sprime, _ = logistic_maps(X0)
    assert result.delta_x == pytest.approx(float(sprime), abs=5e-3)


def test_x_variance_vegas_are_exact(jump_params):
    spec = PayoffSpec(name="xv", kind=PayoffKind.VARIANCE, space=VarianceSpace.LOGIT)
    result = greeks(lambda x, params: closed_form(spec, params, x, 0.0, T).value, X0, jump_params)
    assert result.delta_x == pytest.approx(0.0, abs=1e-9)
    assert result.vega_b == pytest.approx(2 * 0.05 * 600)
    assert result.jump_vega == pytest.approx(0.001 * 600)
    assert result.vega_rho is None


def test_rho_vega_from_correlation_function(jump_params):
    result = greeks(lambda x, params: 0.0, 0.0, jump_params, rho_fn=lambda rho: 3.0 * rho, rho=0.2)
    assert result.vega_rho == pytest.approx(3.0)


@pytest.mark.parametrize(
    "bumps, rho",
    [
        (GreekBumps(x=0.0), None),
        (GreekBumps(sigma_rel=1.5), None),
        (GreekBumps(jump_var_rel=1.0), None),
        (GreekBumps(rho=0.05), 0.99),
    ],
)
def test_invalid_bumps_raise(jump_params, bumps, rho):
    with pytest.raises(BumpSizeError) as excinfo:
        greeks(lambda x, params: 0.0, 0.0, jump_params, bumps, rho_fn=lambda r: r, rho=rho)
    assert excinfo.value.exit_code == 2


def test_covariance_strike_terms():
    state = PairState(x_i=0.0, x_j=0.0, sigma_i=0.05, sigma_j=0.05, rho=0.5)
    cojump = PairDependence(
        t=np.array([0.0]), rho=np.array([0.5]), cojump_intensity=0.001, cojump_m2=0.01, window=300.0
    )
    result = covariance_strike(state, cojump, 0.0, 100.0)
    assert result.details["diffusive"] == pytest.approx(0.0625 * 0.0025 * 0.5 * 100)
    assert result.details["jump"] == pytest.approx(0.001 * 0.01 * 100)


def test_correlation_strike_without_jumps_is_rho():
    state = PairState(x_i=0.3, x_j=-1.0, sigma_i=0.05, sigma_j=0.08, rho=0.5)
    result = correlation_strike(state, None, 0.0, 100.0)
    assert result.value == pytest.approx(0.5)
    assert result.label
    assert {"covariance", "marginal_i", "marginal_j"} <= set(result.details)


def test_correlation_strike_undefined_for_zero_marginal():
    state = PairState(x_i=0.0, x_j=0.0, sigma_i=0.0, sigma_j=0.05, rho=0.5)
    with pytest.raises(CorrelationUndefinedError):
        correlation_strike(state, None, 0.0, 100.0)


def test_price_instrument_reports_every_method(jump_params):
    spec = PayoffSpec(name="xv", kind=PayoffKind.VARIANCE, space=VarianceSpace.LOGIT)
    cfg = PricerConfig(T=120.0, n_paths=2000, n_x=128, n_t=64, instruments=[spec])
    record = price_instrument(spec, jump_params, X0, cfg, seed=1)
    methods = [result["method"] for result in record["results"]]
    assert methods == ["closed-form", "pide", "mc"]
    values = [result["value"] for result in record["results"]]
    assert values[1] == pytest.approx(values[0], rel=1e-2)
    assert values[2] == pytest.approx(values[0], rel=0.1)
    assert record["greeks"]["vega_b"] == pytest.approx(2 * 0.05 * 120)
