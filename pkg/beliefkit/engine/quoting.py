"""The quoting module computes inventory-aware logit quotes, guards them and sizes hedges."""
import threading
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import logger
from ..models import (
    GuardConfig,
    HedgeOrders,
    HedgeRatio,
    InventoryState,
    MarketSnapshot,
    PnLEntry,
    QuoteAction,
    QuotePair,
    QuoteState,
    QuotingConfig,
    QuotingParams,
    RiskLimits,
    ScheduleWindow,
)
from ..utils import ewma_alpha
from .kernel import X_CLAMP, logistic_maps, logit, sigmoid

P_EDGE = 1e-9
FIRST_ORDER_LIMIT = 0.1
TAPE_COLUMNS = ["t", "x_bid", "x_ask", "p_bid", "p_ask", "state", "q"]


def reservation_and_spread(
    x_t: float,
    q: float,
    params: QuotingParams,
    t: float = 0.0,
    gamma: Optional[float] = None,
    sigma2_bar: Optional[float] = None,
) -> Tuple[float, float]:
    """Reservation quote and half-spread in logit units.

    r_x = x_t - q gamma sigma2_bar (T - t) and 2 delta_x = gamma sigma2_bar (T - t) + (2 / k) log(1 + gamma / k).

    Args:
        x_t: Filtered logit.
        q: Signed inventory.
        params: Quoting parameters.
        t: Current time in seconds; the remaining horizon is floored at zero.
        gamma: Risk aversion overriding `params.gamma` (news ramp).
        sigma2_bar: Mean belief variance overriding `params.sigma2_bar`.

    Returns:
        Tuple of (r_x, delta_x).
    """
    gamma = params.gamma if gamma is None else gamma
    sigma2_bar = params.sigma2_bar if sigma2_bar is None else sigma2_bar
    inventory_risk = gamma * sigma2_bar * max(params.horizon_T - t, 0.0)
    r_x = x_t - q * inventory_risk
    delta_x = 0.5 * (inventory_risk + (2.0 / params.k) * np.log1p(gamma / params.k))
    return float(r_x), float(delta_x)


def display_quotes(
    r_x: float,
    delta_x: float,
    x_t: float,
    params: QuotingParams,
    state: QuoteState = QuoteState.LIVE,
) -> QuotePair:
    """Map logit quotes to display probabilities with the half-spread floor.

    The probabilities are S(x_bid) and S(x_ask) exactly. If the displayed half-spread is
    below `floor_delta_p`, both sides move out symmetrically in p around the displayed
    mid, and the logit quotes are re-derived so that p = S(x) keeps holding.
    """
    x_bid = float(np.clip(r_x - delta_x, -X_CLAMP, X_CLAMP))
    x_ask = float(np.clip(r_x + delta_x, -X_CLAMP, X_CLAMP))
    p_bid, p_ask = float(sigmoid(x_bid)), float(sigmoid(x_ask))
    if delta_x <= FIRST_ORDER_LIMIT:
        _, sprime, _ = logistic_maps(x_t)
        first_order = float(sprime) * delta_x
        mapped = 0.5 * (p_ask - p_bid)
        if first_order > 0 and abs(mapped - first_order) > 0.1 * first_order + 1e-12:
            logger.debug("Displayed half-spread %.6f departs from S'(x) delta_x = %.6f.", mapped, first_order)
    floor = params.floor_delta_p
    if 0.5 * (p_ask - p_bid) < floor or p_ask <= p_bid:
        mid = float(np.clip(0.5 * (p_bid + p_ask), floor + P_EDGE, 1.0 - floor - P_EDGE))
        p_bid, p_ask = mid - floor, mid + floor
        x_bid, x_ask = float(logit(p_bid)), float(logit(p_ask))
    return QuotePair(x_bid=x_bid, x_ask=x_ask, p_bid=p_bid, p_ask=p_ask, half_spread_x=delta_x, state=state)


def inventory_cap(x_t: float, params: QuotingParams) -> float:
    """Largest |q| allowed at x_t: q_cap_scale / max(S'(x_t), floor)."""
    _, sprime, _ = logistic_maps(x_t)
    return float(params.q_cap_scale / max(float(sprime), params.sprime_floor))


def news_multiplier(t: float, schedule: Sequence[ScheduleWindow], guards: GuardConfig) -> float:
    """Risk-aversion multiplier: ramps linearly from 1 to `news_ramp` over the lead before a window.

    A window spans centre +- width; inside it the full multiple applies.
    """
    multiplier = 1.0
    for window in schedule:
        start, end = window.center - window.width, window.center + window.width
        if start <= t <= end:
            return guards.news_ramp
        if start - guards.news_lead <= t < start:
            ramp = 1.0 + (guards.news_ramp - 1.0) * (t - (start - guards.news_lead)) / guards.news_lead
            multiplier = max(multiplier, ramp)
    return multiplier


def hedge_notionals(
    book_vega: float,
    sigma_b: float,
    window: float,
    betas: Optional[Dict[str, HedgeRatio]] = None,
    position: float = 0.0,
) -> HedgeOrders:
    """Variance-strip and cross-event hedge recommendations.

    The strip notional is -vega / (2 sigma_b window), the inverse of dK/dsigma_b for a
    constant-volatility logit-variance strike over the window. Cross-event orders are
    -beta_effective * position per hedge event.

    Args:
        book_vega: Belief vega of the book.
        sigma_b: Current belief volatility.
        window: Length of the variance strip in seconds.
        betas: Hedge ratios keyed by hedge event name.
        position: Position in the quoted event.

    Returns:
        HedgeOrders: The recommended orders; with zero sigma_b the strip is not sized.
    """
    cross = {name: -ratio.beta_effective * position for name, ratio in (betas or {}).items()}
    if sigma_b <= 0 or window <= 0:
        message = "belief volatility or strip window is zero; no variance hedge sized"
        if book_vega != 0:
            logger.warning("Book vega %.4g left unhedged: %s.", book_vega, message)
        return HedgeOrders(cross_event=cross, window=max(window, 0.0), warning=message)
    notional = -book_vega / (2.0 * sigma_b * window)
    return HedgeOrders(variance_notional=float(notional), cross_event=cross, window=window)


def pnl_attribution(
    position: float,
    x0: float,
    x1: float,
    t: float,
    delta_x: float,
    gamma_x: float,
    vega_b: float = 0.0,
    d_sigma: float = 0.0,
    vega_rho: Optional[Dict[str, float]] = None,
    d_rho: Optional[Dict[str, float]] = None,
    jump: bool = False,
    d_pi: Optional[float] = None,
) -> PnLEntry:
    """Attribute one step's PnL in logit units.

    Greeks are per contract in x. Off jump steps the components are position times
    delta_x dx, gamma_x dx^2 / 2, vega_b dsigma_b and the correlation vegas times drho; on a
    jump-flagged step the whole move is the jump bucket, position times dp. The residual
    closes the identity against `d_pi`, which defaults to the revaluation position * dp.
    """
    dx = x1 - x0
    dp = float(sigmoid(x1) - sigmoid(x0))
    realised = position * dp if d_pi is None else d_pi
    entry = {"t": t, "d_pi": realised}
    if jump:
        entry["jump"] = position * dp
    else:
        entry["directional"] = position * delta_x * dx
        entry["curvature"] = position * 0.5 * gamma_x * dx**2
        entry["vega"] = position * vega_b * d_sigma
        entry["cross"] = position * sum(
            (vega_rho or {}).get(name, 0.0) * change for name, change in (d_rho or {}).items()
        )
    components = sum(value for key, value in entry.items() if key not in ("t", "d_pi"))
    return PnLEntry(**entry, residual=realised - components)


def _trip_limits(
    snapshot: MarketSnapshot,
    state: InventoryState,
    limits: RiskLimits,
    book_vega: float,
    actions: List[QuoteAction],
) -> bool:
    """Apply the kill switches; returns True when quoting must stop this tick."""
    if snapshot.now < state.paused_until:
        actions.append(QuoteAction(kind="pull", reason="paused"))
        return True
    history = state.sigma2_history[:-1]
    if history and snapshot.sigma2 > limits.vol_spike_factor * max(float(np.mean(history)), 1e-18):
        state.paused_until = snapshot.now + limits.pause_seconds
        actions.append(QuoteAction(kind="pause", reason="volatility spike"))
        return True
    recent = [ts for ts in state.adverse_fills if snapshot.now - ts <= limits.pickoff_window]
    state.adverse_fills = recent
    if len(recent) >= limits.pickoff_count:
        state.paused_until = snapshot.now + limits.pause_seconds
        state.adverse_fills = []
        actions.append(QuoteAction(kind="pause", reason="repeated pick-offs"))
        return True
    _, _, ssecond = logistic_maps(snapshot.x_hat)
    if abs(snapshot.x_hat) < limits.swing_zone and abs(state.q * float(ssecond)) > limits.max_gamma:
        actions.append(QuoteAction(kind="pull", reason="gamma limit in swing zone"))
        return True
    if abs(book_vega) > limits.max_unhedged_vega:
        actions.append(QuoteAction(kind="limit", reason="unhedged vega above limit"))
    return False


def refresh_step(
    snapshot: MarketSnapshot,
    state: InventoryState,
    cfg: QuotingConfig,
    schedule: Sequence[ScheduleWindow] = (),
    betas: Optional[Dict[str, HedgeRatio]] = None,
    book_vega: float = 0.0,
    dt: float = 1.0,
) -> Tuple[QuotePair, List[QuoteAction]]:
    """One pass of the refresh loop.

    Updates the state, computes quotes, applies the guards and kill switches, then emits
    cross-event and calendar hedge recommendations. Mutates `state`.

    Args:
        snapshot: Market inputs of this tick.
        state: Book of the quoting engine.
        cfg: Quoting config.
        schedule: Announced news windows.
        betas: Hedge ratios against other events.
        book_vega: Belief vega of the book.
        dt: Seconds since the previous refresh.

    Returns:
        Tuple of the quote and the actions taken.
    """
    params, guards = cfg.params, cfg.guards
    actions: List[QuoteAction] = []
    keep = ewma_alpha(guards.tox_half_life, dt)
    state.toxicity = keep * state.toxicity + (1.0 - keep) * float(np.clip(snapshot.imbalance, -1.0, 1.0))
    state.sigma2_history.append(snapshot.sigma2)
    max_history = max(int(guards.sigma_window / max(dt, 1e-9)), 1)
    del state.sigma2_history[:-max_history]

    gamma = params.gamma * news_multiplier(snapshot.now, schedule, guards)
    r_x, delta_x = reservation_and_spread(snapshot.x_hat, state.q, params, snapshot.now, gamma, snapshot.sigma2_bar)
    delta_x += params.jump_premium * snapshot.lambda_hat * snapshot.sJ2_hat
    if gamma > params.gamma:
        actions.append(QuoteAction(kind="widen", reason="scheduled news"))

    quote_state = QuoteState.LIVE
    toxicity = abs(state.toxicity)
    if snapshot.now - snapshot.ts > 2.0 * guards.refresh_interval:
        quote_state = QuoteState.PULLED
        actions.append(QuoteAction(kind="pull", reason="stale snapshot"))
    elif snapshot.jump_gamma > guards.tau_J:
        quote_state = QuoteState.PULLED
        actions.append(QuoteAction(kind="pull", reason="jump alarm"))
    elif toxicity >= guards.tox_pull:
        quote_state = QuoteState.PULLED
        actions.append(QuoteAction(kind="pull", reason="toxicity"))
    elif _trip_limits(snapshot, state, cfg.limits, book_vega, actions):
        quote_state = QuoteState.PULLED
    elif toxicity >= guards.tox_widen:
        quote_state = QuoteState.WIDENED
        delta_x *= guards.widen_factor
        actions.append(QuoteAction(kind="widen", reason="toxicity"))

    quote = display_quotes(r_x, delta_x, snapshot.x_hat, params, quote_state)
    window = cfg.hedge_window or max(params.horizon_T - snapshot.now, 0.0)
    hedge = hedge_notionals(book_vega, float(np.sqrt(max(snapshot.sigma2, 0.0))), window, betas, state.q)
    if hedge.variance_notional != 0.0 or hedge.cross_event:
        actions.append(QuoteAction(kind="hedge", reason="rebalance", hedge=hedge))
    return quote, actions


class QuotingEngine:
    """The QuotingEngine class owns the book of one event contract.

    Every mutation of the inventory goes through the engine's lock, so snapshots may be
    produced on another thread while refreshes and fills stay serialised.
    """

    def __init__(
        self,
        cfg: Optional[QuotingConfig] = None,
        schedule: Sequence[ScheduleWindow] = (),
        betas: Optional[Dict[str, HedgeRatio]] = None,
    ):
        self.cfg = cfg or QuotingConfig()
        self.schedule = list(schedule)
        self.betas = betas or {}
        self.state = InventoryState()
        self._lock = threading.Lock()
        self._last_now: Optional[float] = None

    def refresh(self, snapshot: MarketSnapshot, book_vega: float = 0.0) -> Tuple[QuotePair, List[QuoteAction]]:
        """Run one refresh tick."""
        with self._lock:
            dt = self.cfg.guards.refresh_interval if self._last_now is None else max(snapshot.now - self._last_now, 1e-9)
            self._last_now = snapshot.now
            return refresh_step(snapshot, self.state, self.cfg, self.schedule, self.betas, book_vega, dt)

    def fill(self, size: float, x: float, ts: float, adverse: bool = False) -> bool:
        """Apply a signed fill (positive buys) unless it leaves |q| above the cap at x and larger than before."""
        with self._lock:
            q_new = self.state.q + size
            if abs(q_new) > inventory_cap(x, self.cfg.params) and abs(q_new) > abs(self.state.q):
                logger.debug("Fill of %.3g at x=%.3f rejected by the inventory cap.", size, x)
                return False
            self.state.q = q_new
            self.state.last_fill_ts = ts
            if adverse:
                self.state.adverse_fills.append(ts)
            return True

    def record(self, entry: PnLEntry) -> None:
        with self._lock:
            self.state.pnl_ledger.append(entry)


def _trailing_mean(values: np.ndarray, window: int) -> np.ndarray:
    return pd.Series(values).rolling(window, min_periods=1).mean().to_numpy()


def replay(
    frame: pd.DataFrame,
    cfg: Optional[QuotingConfig] = None,
    schedule: Sequence[ScheduleWindow] = (),
    betas: Optional[Dict[str, HedgeRatio]] = None,
    dt: float = 1.0,
) -> Tuple[pd.DataFrame, pd.DataFrame, QuotingEngine]:
    """Replay the refresh loop over a filtered, calibrated series.

    A quote fills when the next filtered logit crosses it: a move through the ask sells
    `fill_size`, a move through the bid buys it. A fill is adverse when the move runs past
    the quote by more than the half-spread.

    Args:
        frame: Columns t, x_hat, sigma_b2, lambda, sJ2, gamma and optionally imbalance and halted;
            gamma on row u is the jump responsibility of the increment ending at u.
        cfg: Quoting config.
        schedule: Announced news windows.
        betas: Hedge ratios against other events.
        dt: Step of the series in seconds.

    Returns:
        Tuple of the quote tape, the PnL ledger and the engine.
    """
    engine = QuotingEngine(cfg, schedule, betas)
    cfg = engine.cfg
    t = frame["t"].to_numpy(dtype=float)
    x = frame["x_hat"].to_numpy(dtype=float)
    sigma2 = frame["sigma_b2"].to_numpy(dtype=float)
    sigma2_bar = _trailing_mean(sigma2, max(int(cfg.guards.sigma_window / dt), 1))
    lam = frame["lambda"].to_numpy(dtype=float)
    sJ2 = frame["sJ2"].to_numpy(dtype=float)
    jump_gamma = frame["gamma"].to_numpy(dtype=float)
    imbalance = frame["imbalance"].to_numpy(dtype=float) if "imbalance" in frame else np.zeros_like(x)
    halted = frame["halted"].to_numpy(dtype=bool) if "halted" in frame else np.zeros(x.size, dtype=bool)
    size = cfg.fill_size
    last_live = t[0]
    tape = []
    for u in range(x.size - 1):
        if not halted[u]:
            last_live = t[u]
        snapshot = MarketSnapshot(
            ts=last_live,
            now=t[u],
            x_hat=x[u],
            sigma2=sigma2[u],
            sigma2_bar=sigma2_bar[u],
            jump_gamma=jump_gamma[u],
            imbalance=imbalance[u],
            lambda_hat=lam[u],
            sJ2_hat=sJ2[u],
        )
        position = engine.state.q
        quote, _ = engine.refresh(snapshot)
        tape.append([t[u], quote.x_bid, quote.x_ask, quote.p_bid, quote.p_ask, quote.state.value, position])
        if quote.is_live:
            if x[u + 1] >= quote.x_ask:
                engine.fill(-size, x[u + 1], t[u + 1], adverse=x[u + 1] - quote.x_ask > quote.half_spread_x)
            elif x[u + 1] <= quote.x_bid:
                engine.fill(size, x[u + 1], t[u + 1], adverse=quote.x_bid - x[u + 1] > quote.half_spread_x)
        _, sprime, ssecond = logistic_maps(x[u])
        engine.record(
            pnl_attribution(
                position,
                x[u],
                x[u + 1],
                t[u + 1],
                delta_x=float(sprime),
                gamma_x=float(ssecond),
                jump=jump_gamma[u + 1] > cfg.guards.tau_J,
            )
        )
    tape_frame = pd.DataFrame(tape, columns=TAPE_COLUMNS)
    return tape_frame, engine.state.ledger_frame(), engine
