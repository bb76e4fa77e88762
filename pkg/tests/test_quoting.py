import numpy as np
import pandas as pd
import pytest

from beliefkit.engine.kernel import sigmoid
from beliefkit.engine.quoting import (
    TAPE_COLUMNS,
    QuotingEngine,
    display_quotes,
    hedge_notionals,
    inventory_cap,
    news_multiplier,
    pnl_attribution,
    refresh_step,
    replay,
    reservation_and_spread,
)
from beliefkit.models import (
    GuardConfig,
    HedgeRatio,
    InventoryState,
    MarketSnapshot,
    QuoteState,
    QuotingConfig,
    QuotingParams,
    ScheduleWindow,
)


@pytest.fixture
def params():
    return QuotingParams(gamma=0.1, k=1.5, horizon_T=1000.0, sigma2_bar=0.0025, floor_delta_p=0.005)


def _snapshot(**overrides):
    values = {"ts": 10.0, "now": 10.0, "x_hat": 0.0, "sigma2": 0.0025, "sigma2_bar": 0.0025}
    values.update(overrides)
    return MarketSnapshot(**values)


@pytest.mark.parametrize("q, sign", [(5.0, -1), (-5.0, 1), (0.0, 0)])
def test_reservation_skews_against_inventory(params, q, sign):
    r_x, _ = reservation_and_spread(0.3, q, params)
    assert np.sign(r_x - 0.3) == sign


def test_spread_formula(params):
    _, delta_x = reservation_and_spread(0.0, 0.0, params, t=400.0)
    expected = 0.5 * (0.1 * 0.0025 * 600 + (2 / 1.5) * np.log(1 + 0.1 / 1.5))
    assert delta_x == pytest.approx(expected)


def test_spread_shrinks_towards_the_horizon(params):
    spreads = [reservation_and_spread(0.0, 0.0, params, t=t)[1] for t in (0.0, 500.0, 1000.0, 2000.0)]
    assert spreads[0] > spreads[1] > spreads[2]
    assert spreads[2] == spreads[3]


def test_spread_increases_with_risk_aversion(params):
    narrow = reservation_and_spread(0.0, 0.0, params, gamma=0.05)[1]
    wide = reservation_and_spread(0.0, 0.0, params, gamma=0.5)[1]
    assert wide > narrow


def test_displayed_half_spread_maps_through_the_slope(params):
    quote = display_quotes(0.0, 0.2, 0.0, params)
    assert 0.5 * (quote.p_ask - quote.p_bid) == pytest.approx(0.05, abs=5e-4)
    assert quote.p_bid == pytest.approx(float(sigmoid(quote.x_bid)))
    assert quote.p_ask == pytest.approx(float(sigmoid(quote.x_ask)))


def test_half_spread_floor_is_applied_in_probability(params):
    quote = display_quotes(0.0, 1e-4, 0.0, params)
    assert quote.p_bid == pytest.approx(0.495)
    assert quote.p_ask == pytest.approx(0.505)
    assert quote.p_ask == pytest.approx(float(sigmoid(quote.x_ask)))


@pytest.mark.parametrize("x", [-9.0, 9.0])
def test_quotes_stay_ordered_near_the_edges(params, x):
    quote = display_quotes(x, 1e-3, x, params)
    assert 0.0 < quote.p_bid < quote.p_ask < 1.0
    assert quote.x_bid < quote.x_ask


def test_inventory_cap_grows_in_the_tails(params):
    assert inventory_cap(0.0, params) == pytest.approx(25.0 / 0.25)
    assert inventory_cap(4.0, params) > inventory_cap(1.0, params) > inventory_cap(0.0, params)


def test_news_multiplier_ramps_before_a_window():
    guards = GuardConfig(news_ramp=3.0, news_lead=90.0)
    schedule = [ScheduleWindow(center=1000.0, width=50.0)]
    assert news_multiplier(1000.0, schedule, guards) == 3.0
    assert news_multiplier(860.0, schedule, guards) == pytest.approx(1.0)
    assert news_multiplier(905.0, schedule, guards) == pytest.approx(2.0)
    assert news_multiplier(2000.0, schedule, guards) == 1.0


def test_variance_hedge_notional():
    orders = hedge_notionals(10.0, 0.05, 100.0)
    assert orders.variance_notional == pytest.approx(-1.0)
    assert orders.warning is None


def test_variance_hedge_skipped_without_volatility():
    orders = hedge_notionals(10.0, 0.0, 100.0)
    assert orders.variance_notional == 0.0
    assert orders.warning


def test_cross_event_hedge_uses_effective_beta():
    ratio = HedgeRatio(beta=0.6, shrinkage_alpha=0.7, clamp_abs=10.0, beta_effective=0.42)
    orders = hedge_notionals(0.0, 0.05, 100.0, {"other": ratio}, position=10.0)
    assert orders.cross_event["other"] == pytest.approx(-4.2)


def test_pnl_attribution_on_a_jump_step():
    entry = pnl_attribution(2.0, 0.0, 1.0, 5.0, delta_x=0.25, gamma_x=0.0, jump=True)
    assert entry.jump == pytest.approx(2.0 * (float(sigmoid(1.0)) - 0.5))
    assert entry.directional == 0.0
    assert entry.residual == pytest.approx(0.0)


def test_pnl_attribution_residual_is_third_order():
    x0, x1 = 0.4, 0.41
    p0 = float(sigmoid(x0))
    sprime = p0 * (1 - p0)
    ssecond = sprime * (1 - 2 * p0)
    entry = pnl_attribution(3.0, x0, x1, 1.0, delta_x=sprime, gamma_x=ssecond)
    assert abs(entry.residual) < 1e-6
    assert entry.components + entry.residual == pytest.approx(entry.d_pi)


@pytest.mark.parametrize(
    "overrides, reason",
    [
        ({"jump_gamma": 0.9}, "jump alarm"),
        ({"ts": 0.0}, "stale snapshot"),
    ],
)
def test_refresh_pulls_quotes(overrides, reason):
    quote, actions = refresh_step(_snapshot(**overrides), InventoryState(), QuotingConfig())
    assert quote.state is QuoteState.PULLED
    assert reason in [action.reason for action in actions]


def test_refresh_widens_on_toxic_flow():
    cfg = QuotingConfig()
    state = InventoryState(toxicity=0.7)
    baseline, _ = refresh_step(_snapshot(), InventoryState(), cfg)
    quote, actions = refresh_step(_snapshot(imbalance=0.7), state, cfg)
    assert quote.state is QuoteState.WIDENED
    assert quote.half_spread_x == pytest.approx(cfg.guards.widen_factor * baseline.half_spread_x)
    assert ("widen", "toxicity") in [(action.kind, action.reason) for action in actions]


def test_refresh_widens_ahead_of_news():
    schedule = [ScheduleWindow(center=100.0, width=50.0)]
    quote, actions = refresh_step(_snapshot(now=60.0, ts=60.0), InventoryState(), QuotingConfig(), schedule)
    assert quote.state is QuoteState.LIVE
    assert ("widen", "scheduled news") in [(action.kind, action.reason) for action in actions]


def test_volatility_spike_pauses_quoting():
    state = InventoryState(sigma2_history=[0.0025] * 10)
    quote, actions = refresh_step(_snapshot(sigma2=0.05), state, QuotingConfig())
    assert quote.state is QuoteState.PULLED
    assert state.paused_until > 10.0
    assert "volatility spike" in [action.reason for action in actions]


def test_engine_fill_respects_inventory_cap():
    engine = QuotingEngine(QuotingConfig(params=QuotingParams(q_cap_scale=1.0)))
    assert engine.fill(3.0, 0.0, 1.0)
    assert not engine.fill(2.0, 0.0, 2.0)
    assert engine.state.q == 3.0
    # Fills that reduce the position are always accepted.
    assert engine.fill(-1.0, 0.0, 3.0)
    assert engine.state.last_fill_ts == 3.0


def test_fill_above_a_tightened_cap_may_only_shrink_the_position():
    engine = QuotingEngine(QuotingConfig(params=QuotingParams(q_cap_scale=1.0)))
    assert engine.fill(6.0, 2.0, 1.0)
    # The cap at x = 0 is 4, below the current position.
    assert engine.fill(-1.0, 0.0, 2.0)
    assert engine.state.q == 5.0
    assert not engine.fill(0.5, 0.0, 3.0)
    assert not engine.fill(-11.0, 0.0, 4.0)
    assert engine.state.q == 5.0
    assert engine.state.last_fill_ts == 2.0


def test_replay_writes_consistent_tape(rng):
    n = 400
    x = np.cumsum(rng.normal(0.0, 0.05, n))
    frame = pd.DataFrame(
        {
            "t": np.arange(n, dtype=float),
            "x_hat": x,
            "sigma_b2": np.full(n, 0.0025),
            "lambda": np.zeros(n),
            "sJ2": np.zeros(n),
            "gamma": np.zeros(n),
        }
    )
    tape, ledger, engine = replay(frame, QuotingConfig())
    assert list(tape.columns) == TAPE_COLUMNS
    assert len(tape) == n - 1 and len(ledger) == n - 1
    live = tape[tape["state"] != "pulled"]
    np.testing.assert_allclose(live["p_bid"], sigmoid(live["x_bid"].to_numpy()), atol=1e-12)
    assert np.all(tape["x_bid"] < tape["x_ask"])
    assert np.max(np.abs(ledger["residual"])) < 1e-3
    assert engine.state.q == pytest.approx(tape["q"].iloc[-1], abs=engine.cfg.fill_size)
