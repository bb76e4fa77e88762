"""The quoting.py file defines the data models of the quoting engine."""
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from .base import BaseModel, ConfigModel


class QuoteState(Enum):
    """An enumeration of quote states."""

    LIVE = "live"
    WIDENED = "widened"
    PULLED = "pulled"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the quote state enum.

        Returns:
            Dict[str, Any]: The schema for the quote state enum.
        """
        return {"type": "string", "enum": [state.value for state in QuoteState]}


class QuotingParams(ConfigModel):
    """The QuotingParams class defines the inventory-aware quoting parameters.

    Attributes:
        gamma (float): Risk aversion (1 / logit^2).
        k (float): Arrival decay (1 / logit).
        arrival_scale (float): Arrival scale A (1/s); recorded, not used by the quote formulas.
        horizon_T (float): Resolution time in seconds.
        sigma2_bar (float): Short-horizon mean belief variance (logit^2 / s).
        floor_delta_p (float): Minimum displayed half-spread in probability.
        q_cap_scale (float): Inventory cap scale.
        sprime_floor (float): Floor on S' in the inventory cap.
        jump_premium (float): Coefficient of the lambda * sJ2 spread add-on.
    """

    gamma: float = 0.1
    k: float = 1.5
    arrival_scale: float = 1.0
    horizon_T: float = 6000.0
    sigma2_bar: float = 0.0025
    floor_delta_p: float = 0.005
    q_cap_scale: float = 25.0
    sprime_floor: float = 1e-4
    jump_premium: float = 0.0

    @model_validator(mode="after")
    def _check_values(self) -> "QuotingParams":
        if self.gamma <= 0 or self.k <= 0 or self.horizon_T <= 0:
            raise ValueError("gamma, k and horizon_T must be positive")
        if self.sigma2_bar < 0 or self.floor_delta_p < 0 or self.sprime_floor <= 0:
            raise ValueError("sigma2_bar and floor_delta_p must be nonnegative, sprime_floor positive")
        return self


class GuardConfig(ConfigModel):
    """The GuardConfig class defines the refresh-loop guards.

    Attributes:
        tox_half_life (float): Half-life of the toxicity EWMA in seconds.
        tox_widen (float): Toxicity above which quotes widen.
        tox_pull (float): Toxicity above which quotes are pulled.
        widen_factor (float): Spread multiplier when widened.
        news_ramp (float): Risk-aversion multiplier inside scheduled windows.
        news_lead (float): Seconds before a window over which the multiplier ramps up.
        tau_J (float): Jump-alarm threshold on the responsibility stream.
        refresh_interval (float): Expected seconds between snapshots.
        sigma_window (float): Trailing window of the sigma2_bar mean in seconds.
    """

    tox_half_life: float = 30.0
    tox_widen: float = 0.6
    tox_pull: float = 0.85
    widen_factor: float = 2.0
    news_ramp: float = 3.0
    news_lead: float = 90.0
    tau_J: float = 0.7
    refresh_interval: float = 1.0
    sigma_window: float = 300.0

    @model_validator(mode="after")
    def _check_values(self) -> "GuardConfig":
        if not 0.0 < self.tox_widen < self.tox_pull:
            raise ValueError("toxicity thresholds must satisfy 0 < tox_widen < tox_pull")
        if self.widen_factor < 1 or self.news_ramp < 1:
            raise ValueError("widen_factor and news_ramp must be at least 1")
        return self


class RiskLimits(ConfigModel):
    """The RiskLimits class defines the kill switches of the refresh loop.

    Attributes:
        swing_zone (float): |x| below which the gamma limit applies.
        max_gamma (float): Largest |q * S''(x)| tolerated inside the swing zone.
        max_unhedged_vega (float): Largest unhedged belief-vega notional.
        vol_spike_factor (float): Pause when sigma2 exceeds this multiple of its trailing mean.
        pickoff_count (int): Adverse fills that trigger a pause.
        pickoff_window (float): Window in seconds over which adverse fills are counted.
        pause_seconds (float): Pause length after a pick-off trip.
    """

    swing_zone: float = 1.0
    max_gamma: float = 5.0
    max_unhedged_vega: float = 50.0
    vol_spike_factor: float = 4.0
    pickoff_count: int = 5
    pickoff_window: float = 60.0
    pause_seconds: float = 30.0


class QuotingConfig(ConfigModel):
    """The QuotingConfig class groups the quoting blocks of a run config."""

    params: QuotingParams = Field(default_factory=QuotingParams)
    guards: GuardConfig = Field(default_factory=GuardConfig)
    limits: RiskLimits = Field(default_factory=RiskLimits)
    fill_size: float = 1.0
    hedge_window: Optional[float] = None


class QuotePair(BaseModel):
    """The QuotePair class defines a two-sided quote in logit and probability units.

    Attributes:
        x_bid (float): Bid in logit units.
        x_ask (float): Ask in logit units.
        p_bid (float): Displayed bid probability.
        p_ask (float): Displayed ask probability.
        half_spread_x (float): Half-spread in logit units.
        state (QuoteState): Live, widened or pulled.
    """

    x_bid: float
    x_ask: float
    p_bid: float
    p_ask: float
    half_spread_x: float
    state: QuoteState = QuoteState.LIVE

    @model_validator(mode="after")
    def _check_order(self) -> "QuotePair":
        if not self.x_bid < self.x_ask or not 0.0 < self.p_bid < self.p_ask < 1.0:
            raise ValueError(f"quotes must be ordered, got x=({self.x_bid}, {self.x_ask}), p=({self.p_bid}, {self.p_ask})")
        return self

    @property
    def is_live(self) -> bool:
        """Whether the quote is shown."""
        return self.state is not QuoteState.PULLED


class MarketSnapshot(BaseModel):
    """The MarketSnapshot class defines the inputs of one refresh tick.

    Attributes:
        ts (float): Time the snapshot was taken, in seconds.
        now (float): Time of the refresh, in seconds.
        x_hat (float): Filtered logit.
        sigma2 (float): Latest diffusive variance estimate.
        sigma2_bar (float): Short-horizon mean diffusive variance.
        jump_gamma (float): Latest jump responsibility.
        imbalance (float): Signed aggressor imbalance in [-1, 1].
        lambda_hat (float): Latest jump intensity estimate.
        sJ2_hat (float): Latest jump second moment estimate.
    """

    ts: float
    now: float
    x_hat: float
    sigma2: float = 0.0
    sigma2_bar: float
    jump_gamma: float = 0.0
    imbalance: float = 0.0
    lambda_hat: float = 0.0
    sJ2_hat: float = 0.0


class PnLEntry(BaseModel):
    """The PnLEntry class defines the attribution of one step's PnL.

    Attributes:
        t (float): End time of the step.
        d_pi (float): Realised PnL by full revaluation.
        directional (float): Delta times the probability move.
        curvature (float): Half gamma times the squared probability move.
        vega (float): Belief vega times the volatility change.
        cross (float): Correlation vega times the correlation change.
        jump (float): Position times the probability move on jump-flagged steps.
        residual (float): Remainder closing the identity.
    """

    t: float
    d_pi: float
    directional: float = 0.0
    curvature: float = 0.0
    vega: float = 0.0
    cross: float = 0.0
    jump: float = 0.0
    residual: float = 0.0

    @property
    def components(self) -> float:
        """Sum of the attributed components without the residual."""
        return self.directional + self.curvature + self.vega + self.cross + self.jump


class InventoryState(BaseModel):
    """The InventoryState class defines the mutable book of one quoting engine.

    Attributes:
        q (float): Signed contract position.
        last_fill_ts (float): Time of the last accepted fill.
        pnl_ledger (List[PnLEntry]): Attributed PnL entries.
        toxicity (float): Current toxicity EWMA.
        adverse_fills (List[float]): Times of recent adverse fills.
        paused_until (float): Time before which quoting stays paused.
        sigma2_history (List[float]): Trailing diffusive variance samples.
    """

    q: float = 0.0
    last_fill_ts: Optional[float] = None
    pnl_ledger: List[PnLEntry] = Field(default_factory=list)
    toxicity: float = 0.0
    adverse_fills: List[float] = Field(default_factory=list)
    paused_until: float = -np.inf
    sigma2_history: List[float] = Field(default_factory=list)

    def ledger_frame(self) -> pd.DataFrame:
        """Convert the ledger to its CSV layout."""
        columns = ["t", "d_pi", "directional", "curvature", "vega", "cross", "jump", "residual"]
        return pd.DataFrame([entry.model_dump() for entry in self.pnl_ledger], columns=columns)


class HedgeOrders(BaseModel):
    """The HedgeOrders class defines hedge recommendations.

    Attributes:
        variance_notional (float): Notional of the x-variance strip.
        cross_event (Dict[str, float]): Orders in other events keyed by event name.
        window (float): Length of the variance strip in seconds.
        warning (str): Set when no hedge could be sized.
    """

    variance_notional: float = 0.0
    cross_event: Dict[str, float] = Field(default_factory=dict)
    window: float = 0.0
    warning: Optional[str] = None


class QuoteAction(BaseModel):
    """The QuoteAction class defines one action emitted by the refresh loop."""

    kind: str
    reason: str
    hedge: Optional[HedgeOrders] = None
